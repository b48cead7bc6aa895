//! Sweeps density and duration fluctuation for the basic variant and prints
//! the sweep CSV: empirical ratios next to the guaranteed bound.

use omkd::generators::GeneratorConfig;
use omkd::harness::{bench, write_sweep_csv, Family, GridPoint, SweepConfig};
use omkd::Mode;

fn main() -> omkd::Result<()> {
    let grid = [(1.0, 1.0), (4.0, 1.0), (4.0, 4.0), (16.0, 4.0)]
        .into_iter()
        .map(|(density_ratio, duration_ratio)| GridPoint { density_ratio, duration_ratio, xi: None })
        .collect();
    let sweep = SweepConfig {
        generator: GeneratorConfig { requests: 10, resources: 2, horizon: 12, ..Default::default() },
        grid,
        reps: 25,
        family: Family::Random,
        mode: Mode::Strict,
    };
    let rows = bench(&sweep)?;
    write_sweep_csv(&rows, std::io::stdout())?;
    Ok(())
}
