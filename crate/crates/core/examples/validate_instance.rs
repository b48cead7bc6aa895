//! Validates an instance file (or a generated instance that breaks the weight
//! precondition) in both checking modes.

use omkd::generators::{generate, GeneratorConfig, WeightMode};
use omkd::harness::load_instance;
use omkd::instance::{validate_instance, TheoremMode};

fn main() -> omkd::Result<()> {
    let instance = match std::env::args().nth(1) {
        Some(path) => load_instance(path.as_ref())?,
        None => generate(&GeneratorConfig { weight_mode: WeightMode::Violating, ..Default::default() })?,
    };
    for mode in [TheoremMode::Assumptions, TheoremMode::Guarantee] {
        let report = validate_instance(&instance, mode);
        println!("{mode:?}: feasible = {}", report.feasible_for_guarantee);
        for v in &report.violations {
            println!("  {v}");
        }
        for n in &report.notes {
            println!("  note: {n}");
        }
    }
    Ok(())
}
