//! Writes one instance of each variant, plus a density ramp, as JSON into
//! the directory given on the command line (default: current directory).

use std::path::PathBuf;

use omkd::generators::{adversarial_density_ramp, generate, GeneratorConfig};
use omkd::harness::save_instance;
use omkd::instance::{fluctuation_stats, validate_instance, TheoremMode};
use omkd::Variant;

fn main() -> omkd::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    std::fs::create_dir_all(&dir)?;
    for variant in [Variant::Basic, Variant::LoadBalance, Variant::MultiDim] {
        let config = GeneratorConfig { variant, seed: 1, requests: 12, ..Default::default() };
        let instance = generate(&config)?;
        let path = dir.join(format!("{variant}.json"));
        save_instance(&instance, &path)?;
        let report = validate_instance(&instance, TheoremMode::Guarantee);
        println!("{}: {} requests, feasible for guarantee: {}", path.display(), instance.num_requests(), report.feasible_for_guarantee);
    }
    let ramp = adversarial_density_ramp(&GeneratorConfig { requests: 8, density_ratio: 8.0, duration_ratio: 2.0, ..Default::default() })?;
    let stats = fluctuation_stats(&ramp)?;
    let path = dir.join("ramp.json");
    save_instance(&ramp, &path)?;
    println!("{}: realized density ratio {:.3}, duration ratio {:.3}", path.display(), stats.density_ratio_max, stats.duration_ratio_max);
    Ok(())
}
