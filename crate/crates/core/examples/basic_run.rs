//! Runs the basic admission rule on a small hand-built instance and prints
//! every decision together with the price of the busiest slot. All requests
//! arrive at time 0 and are served in id order.

use omkd::{basic, Decision, Instance, Observer, Offer, PriceState, Request, Resource, RunOptions, Variant};

struct PeakPrice;

impl Observer for PeakPrice {
    fn after_step(&mut self, d: &Decision, prices: &PriceState) {
        let peak = prices.cells().map(|(_, _, _, c)| c.price).fold(0.0, f64::max);
        println!(
            "request {:>2}  {:<8}  k*={:?}  residual={:>8.4}  dP={:>6.3}  dD={:>8.4}  peak price={:.4}",
            d.request,
            d.outcome.label(),
            d.k_star,
            d.residual,
            d.delta_primal,
            d.delta_dual,
            peak
        );
    }
}

fn main() -> omkd::Result<()> {
    let resources = vec![Resource::single(0, 2.0), Resource::single(1, 1.0)];
    let offer = |v: f64, w: f64, s: u32, d: u32| Offer::single(v, w, s, d);
    let requests: Vec<Request> = [
        vec![(0, offer(0.4, 0.1, 0, 4)), (1, offer(0.3, 0.1, 0, 3))],
        vec![(0, offer(0.2, 0.1, 1, 2))],
        vec![(1, offer(0.6, 0.1, 1, 3))],
        vec![(0, offer(0.9, 0.1, 2, 2)), (1, offer(0.9, 0.1, 2, 2))],
        vec![(0, offer(0.1, 0.1, 2, 1))],
    ]
    .into_iter()
    .enumerate()
    .map(|(id, offers)| Request { id, arrival: 0, offers: offers.into_iter().collect() })
    .collect();
    let instance = Instance::new(6, Variant::Basic, resources, requests)?;

    let trace = basic::run_observed(&instance, &RunOptions::default(), &mut PeakPrice)?;
    for (k, p) in trace.pricing.0.iter().enumerate() {
        if let Some(p) = p {
            println!("resource {k}: gamma={:.4} density_min={:.4}", p.gamma, p.density_min);
        }
    }
    println!("P = {:.4}, D = {:.4}, D recomputed = {:.4}", trace.primal, trace.dual, trace.dual_objective(&instance));
    Ok(())
}
