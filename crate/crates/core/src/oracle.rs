//! Exact offline optimum for small instances, dual-certificate checks and
//! competitive-ratio bookkeeping.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{FluctuationStats, Instance, Variant};
use crate::pricing::{posted_cost, PricingTable};
use crate::trace::{batch_cap_violations, capacity_violations, Trace, CAPACITY_TOLERANCE};

/// Largest instance [`exact_optimum`] accepts.
pub const DEFAULT_REQUEST_CAP: usize = 20;
/// Largest instance for which [`verify_dual_certificate`] also solves the
/// offline problem.
pub const CERTIFICATE_ORACLE_CAP: usize = 12;
/// Relative tolerance for the `P <= OPT <= D` comparisons.
pub const SANDWICH_TOLERANCE: f64 = 1e-6;
/// Relative tolerance for individual dual constraints.
pub const DUAL_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exhaustive,
    BranchAndBound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OfflineSolution {
    pub value: f64,
    /// Resource per request id.
    pub assignment: Vec<Option<usize>>,
    pub nodes: u64,
    pub method: Method,
}

/// Dense occupancy used by the search: load per (resource, dimension, slot)
/// and admissions per (batch, resource).
struct Occupancy<'a> {
    instance: &'a Instance,
    load: Vec<Vec<Vec<f64>>>,
    batch_of: Vec<usize>,
    batch_count: Vec<Vec<u32>>,
}

impl<'a> Occupancy<'a> {
    fn new(instance: &'a Instance) -> Self {
        let horizon = instance.horizon as usize;
        let mut times: Vec<u32> = instance.requests.iter().map(|r| r.arrival).collect();
        times.dedup();
        let batch_of = instance
            .requests
            .iter()
            .map(|r| times.binary_search(&r.arrival).unwrap_or(0))
            .collect();
        Self {
            instance,
            load: instance
                .resources
                .iter()
                .map(|r| vec![vec![0.0; horizon]; r.dims()])
                .collect(),
            batch_of,
            batch_count: vec![vec![0; instance.num_resources()]; times.len()],
        }
    }

    /// Tries to place request at sorted position `i` on `k`; leaves the state
    /// untouched and returns false if a constraint would break.
    fn place(&mut self, i: usize, k: usize) -> bool {
        let req = &self.instance.requests[i];
        let offer = &req.offers[&k];
        let resource = &self.instance.resources[k];
        if self.instance.variant == Variant::LoadBalance {
            let q = resource.q.unwrap_or(u32::MAX);
            if self.batch_count[self.batch_of[i]][k] >= q {
                return false;
            }
        }
        for m in 0..offer.dims() {
            let cap = resource.capacities[m] * (1.0 + CAPACITY_TOLERANCE);
            if offer.slots(m).any(|t| self.load[k][m][t as usize] + offer.w[m] > cap) {
                return false;
            }
        }
        self.shift(i, k, 1.0);
        true
    }

    fn remove(&mut self, i: usize, k: usize) {
        self.shift(i, k, -1.0);
    }

    fn shift(&mut self, i: usize, k: usize, sign: f64) {
        let offer = &self.instance.requests[i].offers[&k];
        for m in 0..offer.dims() {
            for t in offer.slots(m) {
                self.load[k][m][t as usize] += sign * offer.w[m];
            }
        }
        let count = &mut self.batch_count[self.batch_of[i]][k];
        if sign > 0.0 {
            *count += 1;
        } else {
            *count -= 1;
        }
    }
}

struct Search<'a> {
    occ: Occupancy<'a>,
    /// Sorted request positions, most valuable first.
    order: Vec<usize>,
    /// Candidate resources per sorted position, by descending reward.
    choices: Vec<Vec<(usize, f64)>>,
    /// `suffix[j]`: sum of the best rewards from order position `j` on.
    suffix: Vec<f64>,
    current: Vec<Option<usize>>,
    best: Vec<Option<usize>>,
    best_value: f64,
    nodes: u64,
}

impl Search<'_> {
    fn dfs(&mut self, j: usize, value: f64) {
        self.nodes += 1;
        if value > self.best_value {
            self.best_value = value;
            self.best.clone_from(&self.current);
        }
        if j == self.order.len() || value + self.suffix[j] <= self.best_value {
            return;
        }
        let i = self.order[j];
        for c in 0..self.choices[j].len() {
            let (k, v) = self.choices[j][c];
            if self.occ.place(i, k) {
                self.current[i] = Some(k);
                self.dfs(j + 1, value + v);
                self.current[i] = None;
                self.occ.remove(i, k);
            }
        }
        self.dfs(j + 1, value);
    }
}

/// Optimal offline assignment, refusing instances with more than
/// [`DEFAULT_REQUEST_CAP`] requests.
pub fn exact_optimum(instance: &Instance) -> Result<OfflineSolution> {
    exact_optimum_with_cap(instance, DEFAULT_REQUEST_CAP)
}

/// Depth-first branch and bound over per-request choices. The bound is the
/// value so far plus the best reward of every remaining request.
pub fn exact_optimum_with_cap(instance: &Instance, cap: usize) -> Result<OfflineSolution> {
    let n = instance.num_requests();
    if n > cap {
        return Err(Error::TooLarge { requests: n, cap });
    }
    let mut choices: Vec<Vec<(usize, f64)>> = instance
        .requests
        .iter()
        .map(|r| {
            let mut c: Vec<(usize, f64)> =
                r.offers.iter().filter(|(_, o)| o.v > 0.0).map(|(&k, o)| (k, o.v)).collect();
            c.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            c
        })
        .collect();
    let top = |c: &Vec<(usize, f64)>| c.first().map_or(0.0, |x| x.1);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| top(&choices[b]).total_cmp(&top(&choices[a])).then(a.cmp(&b)));
    let ordered: Vec<_> = order.iter().map(|&i| std::mem::take(&mut choices[i])).collect();
    let mut suffix = vec![0.0; n + 1];
    for j in (0..n).rev() {
        suffix[j] = suffix[j + 1] + top(&ordered[j]);
    }

    let mut search = Search {
        occ: Occupancy::new(instance),
        order,
        choices: ordered,
        suffix,
        current: vec![None; n],
        best: vec![None; n],
        best_value: 0.0,
        nodes: 0,
    };
    search.dfs(0, 0.0);
    Ok(OfflineSolution {
        value: search.best_value,
        assignment: by_request_id(instance, &search.best),
        nodes: search.nodes,
        method: Method::BranchAndBound,
    })
}

/// Enumerates every assignment with no pruning, checking feasibility at the
/// leaves with the independent post-run audits. Exponential; meant for
/// cross-checking [`exact_optimum`] on tiny instances.
pub fn exhaustive_optimum(instance: &Instance) -> OfflineSolution {
    let n = instance.num_requests();
    let options: Vec<Vec<Option<usize>>> = instance
        .requests
        .iter()
        .map(|r| std::iter::once(None).chain(r.offers.keys().map(|&k| Some(k))).collect())
        .collect();
    let mut index = vec![0usize; n];
    let mut best = (0.0, vec![None; instance.num_requests()]);
    let mut nodes = 0u64;
    loop {
        nodes += 1;
        let mut assignment = vec![None; n];
        let mut value = 0.0;
        for (i, req) in instance.requests.iter().enumerate() {
            if let Some(k) = options[i][index[i]] {
                assignment[req.id] = Some(k);
                value += req.offers[&k].v;
            }
        }
        let feasible = capacity_violations(instance, &assignment).is_empty()
            && (instance.variant != Variant::LoadBalance || batch_cap_violations(instance, &assignment).is_empty());
        if feasible && value > best.0 {
            best = (value, assignment);
        }
        // Odometer increment.
        let mut i = 0;
        while i < n {
            index[i] += 1;
            if index[i] < options[i].len() {
                break;
            }
            index[i] = 0;
            i += 1;
        }
        if i == n {
            break;
        }
    }
    OfflineSolution { value: best.0, assignment: best.1, nodes, method: Method::Exhaustive }
}

fn by_request_id(instance: &Instance, positional: &[Option<usize>]) -> Vec<Option<usize>> {
    let mut out = vec![None; instance.num_requests()];
    for (i, req) in instance.requests.iter().enumerate() {
        out[req.id] = positional[i];
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualViolation {
    pub request: usize,
    /// `None` for a sign constraint on the request's own utility.
    pub resource: Option<usize>,
    /// Amount by which the constraint fails.
    pub amount: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualCertificateReport {
    pub violations: Vec<DualViolation>,
    pub max_violation: f64,
    /// Sign violations among prices and batch duals.
    pub negative_prices: usize,
    pub dual_objective: f64,
    pub primal: f64,
    pub offline: Option<f64>,
    /// `P <= OPT <= D` within [`SANDWICH_TOLERANCE`], or `P <= D` when the
    /// optimum was not computed.
    pub sandwich_holds: bool,
}

impl DualCertificateReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty() && self.negative_prices == 0 && self.sandwich_holds
    }
}

/// Checks the final dual variables of `trace` against every dual constraint,
/// solving the offline problem for instances of at most
/// [`CERTIFICATE_ORACLE_CAP`] requests.
pub fn verify_dual_certificate(instance: &Instance, trace: &Trace) -> Result<DualCertificateReport> {
    let offline = if instance.num_requests() <= CERTIFICATE_ORACLE_CAP {
        Some(exact_optimum(instance)?)
    } else {
        None
    };
    Ok(verify_dual_certificate_against(instance, trace, offline.as_ref()))
}

pub fn verify_dual_certificate_against(
    instance: &Instance,
    trace: &Trace,
    offline: Option<&OfflineSolution>,
) -> DualCertificateReport {
    let batch_duals: BTreeMap<u32, &[f64]> = trace.batches.iter().map(|b| (b.time, b.h.as_slice())).collect();
    let mut violations = Vec::new();
    for req in &instance.requests {
        let u = trace.utilities[req.id];
        if u < 0.0 {
            violations.push(DualViolation { request: req.id, resource: None, amount: -u });
        }
        for (&k, offer) in &req.offers {
            let h = batch_duals.get(&req.arrival).map_or(0.0, |h| h[k]);
            let lhs = u + h + posted_cost(&trace.prices, offer, k);
            let gap = offer.v - lhs;
            if gap > DUAL_TOLERANCE * offer.v.max(1.0) {
                violations.push(DualViolation { request: req.id, resource: Some(k), amount: gap });
            }
        }
    }
    let negative_prices = trace.prices.cells().filter(|(_, _, _, c)| c.price < 0.0).count()
        + trace.batches.iter().flat_map(|b| &b.h).filter(|&&h| h < 0.0).count();

    let dual_objective = trace.dual_objective(instance);
    let primal = trace.primal;
    let within = |a: f64, b: f64| a <= b + SANDWICH_TOLERANCE * b.abs().max(1.0);
    let sandwich_holds = match offline {
        Some(o) => within(primal, o.value) && within(o.value, dual_objective),
        None => within(primal, dual_objective),
    };
    DualCertificateReport {
        max_violation: violations.iter().map(|v| v.amount).fold(0.0, f64::max),
        violations,
        negative_prices,
        dual_objective,
        primal,
        offline: offline.map(|o| o.value),
        sandwich_holds,
    }
}

/// `offline / online`, with `0 / 0 = 1` and `x / 0 = inf`.
pub fn empirical_cr(online: f64, offline: f64) -> f64 {
    if offline <= 0.0 {
        1.0
    } else if online <= 0.0 {
        f64::INFINITY
    } else {
        offline / online
    }
}

/// `2 gamma_max / ln 2` for the pricing the algorithm would use with `stats`.
pub fn theoretical_cr_bound(stats: &FluctuationStats, variant: Variant) -> Result<f64> {
    Ok(cr_bound_for(&PricingTable::from_stats(stats, variant)?))
}

pub fn cr_bound_for(pricing: &PricingTable) -> f64 {
    2.0 * pricing.gamma_max() / std::f64::consts::LN_2
}
