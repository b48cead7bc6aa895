//! Solves a small instance exactly, checks the online run's dual
//! certificate, and compares the empirical ratio with the guarantee.

use omkd::generators::{adversarial_density_ramp, GeneratorConfig};
use omkd::oracle::{cr_bound_for, empirical_cr, exact_optimum, exhaustive_optimum, verify_dual_certificate};
use omkd::basic;

fn main() -> omkd::Result<()> {
    let config = GeneratorConfig { resources: 1, requests: 10, horizon: 16, density_ratio: 16.0, duration_ratio: 4.0, ..Default::default() };
    let instance = adversarial_density_ramp(&config)?;

    let bb = exact_optimum(&instance)?;
    let ex = exhaustive_optimum(&instance);
    println!("branch and bound: value {:.4} after {} nodes", bb.value, bb.nodes);
    println!("enumeration:      value {:.4} after {} nodes", ex.value, ex.nodes);

    let trace = basic::run(&instance)?;
    let report = verify_dual_certificate(&instance, &trace)?;
    println!(
        "online P = {:.4} <= OPT = {:.4} <= D = {:.4}: {}",
        report.primal,
        bb.value,
        report.dual_objective,
        report.sandwich_holds
    );
    println!("dual constraint violations: {}", report.violations.len());
    println!(
        "empirical ratio {:.4}, guaranteed at most {:.4}",
        empirical_cr(trace.primal, bb.value),
        cr_bound_for(&trace.pricing)
    );
    Ok(())
}
