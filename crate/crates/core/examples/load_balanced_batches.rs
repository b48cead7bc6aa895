//! Batched arrivals with per-batch caps: shows each batch's assignment LP
//! solution and the dual values it hands back.

use omkd::generators::{generate, GeneratorConfig};
use omkd::{lb, Variant};

fn main() -> omkd::Result<()> {
    let config = GeneratorConfig {
        variant: Variant::LoadBalance,
        seed: 4,
        requests: 12,
        resources: 2,
        batch_size: 4,
        q: [1, 2],
        ..Default::default()
    };
    let instance = generate(&config)?;
    let trace = lb::run_lb(&instance)?;

    for batch in &trace.batches {
        println!("batch at t={} requests {:?}", batch.time, batch.requests);
        println!("  assignment {:?}", batch.assignment);
        println!("  u = {:.4?}", batch.u);
        println!("  h = {:.4?}", batch.h);
        println!(
            "  LP value {:.4} = dual {:.4}; dP = {:.4}, dD = {:.4}",
            batch.lp_primal, batch.lp_dual, batch.delta_primal, batch.delta_dual
        );
    }
    let q: Vec<_> = instance.resources.iter().map(|r| r.q).collect();
    println!("caps q = {q:?}; admitted {} of {}", trace.admitted(), instance.num_requests());
    println!("P = {:.4}, D = {:.4}", trace.primal, trace.dual);
    Ok(())
}
