//! Multi-dimensional demands: each dimension has its own capacity and
//! interval, and all dimensions of a resource share one gamma.

use omkd::instance::fluctuation_stats;
use omkd::{md, Instance, Offer, Request, Resource, Variant};

fn main() -> omkd::Result<()> {
    // Two resources with (cpu, memory) capacities.
    let resources = vec![
        Resource { id: 0, capacities: vec![4.0, 8.0], q: None },
        Resource { id: 1, capacities: vec![2.0, 16.0], q: None },
    ];
    let offer = |v: f64, w: [f64; 2], s: [u32; 2], d: [u32; 2]| Offer { v, w: w.to_vec(), s: s.to_vec(), d: d.to_vec() };
    let requests = vec![
        Request { id: 0, arrival: 0, offers: [(0, offer(1.0, [0.2, 0.1], [0, 0], [3, 4])), (1, offer(1.2, [0.1, 0.3], [0, 1], [2, 2]))].into_iter().collect() },
        Request { id: 1, arrival: 1, offers: [(0, offer(0.8, [0.1, 0.0], [1, 1], [2, 1]))].into_iter().collect() },
        Request { id: 2, arrival: 1, offers: [(1, offer(2.5, [0.2, 0.4], [1, 2], [3, 2]))].into_iter().collect() },
        Request { id: 3, arrival: 2, offers: [(0, offer(0.5, [0.1, 0.2], [2, 2], [1, 1])), (1, offer(0.5, [0.1, 0.2], [2, 2], [1, 1]))].into_iter().collect() },
    ];
    let instance = Instance::new(6, Variant::MultiDim, resources, requests)?;

    let stats = fluctuation_stats(&instance)?;
    println!("density ratio {:.3}, duration ratio {:.3}, xi {:.3}", stats.density_ratio_max, stats.duration_ratio_max, stats.xi_max);

    let trace = md::run_md(&instance)?;
    for d in &trace.decisions {
        println!("request {} -> {:?} (residual {:.4})", d.request, d.outcome, d.residual);
    }
    for (k, m, t, cell) in trace.prices.cells() {
        println!("  p[{k}][{m}][{t}] = {:.4}  (z = {:.2})", cell.price, cell.utilization);
    }
    println!("P = {:.4}, D = {:.4}", trace.primal, trace.dual);
    Ok(())
}
