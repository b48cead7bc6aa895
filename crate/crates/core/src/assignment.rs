//! Maximum-weight b-matching between a batch of requests (capacity 1 each)
//! and resources (capacity `q_k` each), solved as a min-cost flow by
//! successive shortest paths, together with an optimal dual `(u, h)`.
//!
//! The constraint matrix is totally unimodular, so the flow solution is an
//! integral optimum of the LP relaxation. The dual is read off a shortest-path
//! computation over the complementary-slackness system
//!
//! ```text
//! u_n + h_k >= r_nk   for every positive edge (equality on matched edges)
//! u_n >= 0, h_k >= 0, u_n = 0 if n unmatched, h_k = 0 if k has slack
//! ```
//!
//! which is a system of difference constraints once `h_k` is written as
//! `-y_k`. It is feasible exactly when the matching is optimal.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchAssignment {
    /// Resource assigned to each row, if any.
    pub assignment: Vec<Option<usize>>,
    pub u: Vec<f64>,
    pub h: Vec<f64>,
    /// `sum r_nk x_nk`.
    pub primal: f64,
    /// `sum u_n + sum q_k h_k`.
    pub dual: f64,
}

#[derive(Clone, Copy)]
struct Arc {
    to: usize,
    cap: u32,
    cost: f64,
    rev: usize,
}

struct Network {
    adj: Vec<Vec<Arc>>,
}

impl Network {
    fn new(n: usize) -> Self {
        Self { adj: vec![Vec::new(); n] }
    }

    fn add(&mut self, from: usize, to: usize, cap: u32, cost: f64) {
        let rf = self.adj[to].len();
        let rt = self.adj[from].len();
        self.adj[from].push(Arc { to, cap, cost, rev: rf });
        self.adj[to].push(Arc { to: from, cap: 0, cost: -cost, rev: rt });
    }

    /// Bellman-Ford from `source` over arcs with residual capacity. Returns
    /// distances and the arc used to reach each node.
    fn shortest_paths(&self, source: usize, eps: f64) -> (Vec<f64>, Vec<Option<(usize, usize)>>) {
        let n = self.adj.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut parent = vec![None; n];
        dist[source] = 0.0;
        for _ in 0..n {
            let mut changed = false;
            for u in 0..n {
                if !dist[u].is_finite() {
                    continue;
                }
                for (i, a) in self.adj[u].iter().enumerate() {
                    if a.cap > 0 && dist[u] + a.cost < dist[a.to] - eps {
                        dist[a.to] = dist[u] + a.cost;
                        parent[a.to] = Some((u, i));
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        (dist, parent)
    }
}

/// Solves the batch LP over the positive entries of `r` (`None` means the
/// pair is not offered). `q[k]` bounds how many rows may go to column `k`.
pub fn solve_batch_assignment(r: &[Vec<Option<f64>>], q: &[u32]) -> BatchAssignment {
    let rows = r.len();
    let cols = q.len();
    let scale = r
        .iter()
        .flatten()
        .flatten()
        .fold(1.0_f64, |m, x| m.max(x.abs()));
    let eps = 1e-12 * scale;

    // Nodes: source, rows, columns, sink.
    let source = 0;
    let row = |n: usize| 1 + n;
    let col = |k: usize| 1 + rows + k;
    let sink = 1 + rows + cols;
    let mut net = Network::new(sink + 1);
    for n in 0..rows {
        net.add(source, row(n), 1, 0.0);
    }
    for (n, entries) in r.iter().enumerate() {
        for (k, entry) in entries.iter().enumerate().take(cols) {
            if let Some(v) = *entry {
                if v > 0.0 {
                    net.add(row(n), col(k), 1, -v);
                }
            }
        }
    }
    for (k, &cap) in q.iter().enumerate() {
        net.add(col(k), sink, cap, 0.0);
    }

    // Augment one unit at a time while a negative-cost path remains; path
    // costs are nondecreasing, so stopping there gives the maximum weight.
    loop {
        let (dist, parent) = net.shortest_paths(source, eps);
        if !(dist[sink] < -eps) {
            break;
        }
        let mut v = sink;
        let mut hops = 0;
        let mut path = Vec::new();
        while v != source {
            let Some((u, i)) = parent[v] else { break };
            path.push((u, i));
            v = u;
            hops += 1;
            if hops > net.adj.len() {
                break;
            }
        }
        if v != source {
            break;
        }
        for (u, i) in path {
            let Arc { to, rev, .. } = net.adj[u][i];
            net.adj[u][i].cap -= 1;
            net.adj[to][rev].cap += 1;
        }
    }

    let mut assignment = vec![None; rows];
    let mut load = vec![0u32; cols];
    for n in 0..rows {
        for a in &net.adj[row(n)] {
            if a.to >= col(0) && a.to < sink && a.cap == 0 && a.cost < 0.0 {
                let k = a.to - col(0);
                assignment[n] = Some(k);
                load[k] += 1;
            }
        }
    }
    let primal = assignment
        .iter()
        .enumerate()
        .filter_map(|(n, a)| a.map(|k| r[n][k].unwrap_or(0.0)))
        .sum();

    let (u, h) = extract_dual(r, q, &assignment, &load, eps);
    let dual = u.iter().sum::<f64>() + h.iter().zip(q).map(|(h, &q)| h * f64::from(q)).sum::<f64>();
    BatchAssignment { assignment, u, h, primal, dual }
}

fn extract_dual(
    r: &[Vec<Option<f64>>],
    q: &[u32],
    assignment: &[Option<usize>],
    load: &[u32],
    eps: f64,
) -> (Vec<f64>, Vec<f64>) {
    let rows = r.len();
    let cols = q.len();
    // Node 0 is the zero reference; variables are u_n and y_k = -h_k. An arc
    // a -> b of weight c encodes x_b <= x_a + c.
    let root = 0;
    let row = |n: usize| 1 + n;
    let col = |k: usize| 1 + rows + k;
    let mut net = Network::new(1 + rows + cols);
    for n in 0..rows {
        net.add(row(n), root, 1, 0.0); // u_n >= 0
        if assignment[n].is_none() {
            net.add(root, row(n), 1, 0.0); // u_n <= 0
        }
    }
    for k in 0..cols {
        net.add(root, col(k), 1, 0.0); // y_k <= 0
        if load[k] < q[k] {
            net.add(col(k), root, 1, 0.0); // y_k >= 0
        }
    }
    for (n, entries) in r.iter().enumerate() {
        for (k, entry) in entries.iter().enumerate().take(cols) {
            let Some(v) = *entry else { continue };
            if v <= 0.0 {
                continue;
            }
            net.add(row(n), col(k), 1, -v); // y_k <= u_n - r
            if assignment[n] == Some(k) {
                net.add(col(k), row(n), 1, v); // u_n <= y_k + r
            }
        }
    }
    // Reverse arcs carry zero capacity and are ignored by the search.
    let (dist, _) = net.shortest_paths(root, eps);
    let u = (0..rows).map(|n| dist[row(n)].max(0.0)).collect();
    let h = (0..cols).map(|k| (-dist[col(k)]).max(0.0)).collect();
    (u, h)
}
