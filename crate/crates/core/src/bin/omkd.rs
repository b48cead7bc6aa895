use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use omkd::generators::{adversarial_density_ramp, generate, GeneratorConfig};
use omkd::harness::{self, SweepConfig};
use omkd::oracle::exact_optimum_with_cap;
use omkd::{Mode, Result, TheoremMode, Variant};

#[derive(Parser)]
#[command(name = "omkd", version, about = "Online knapsack admission with departures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check an instance against the standing assumptions and the weight
    /// precondition; exits 1 if any check fails.
    Validate {
        instance: PathBuf,
        #[arg(long, default_value = "guarantee", value_parser = parse_theorem_mode)]
        check: TheoremMode,
    },
    /// Generate an instance from a generator config.
    Gen {
        /// Generator config JSON; defaults apply to missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        variant: Option<Variant>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        requests: Option<usize>,
        /// Use the adversarial density ramp instead of random sampling.
        #[arg(long)]
        ramp: bool,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an online algorithm and audit the result.
    Run {
        instance: PathBuf,
        #[arg(long, value_parser = ["basic", "lb", "md"])]
        algo: String,
        #[arg(long, default_value = "strict")]
        mode: Mode,
        /// Also solve the offline problem exactly and report the ratio.
        #[arg(long)]
        oracle: bool,
        /// Directory for trace.csv and summary.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep a grid of fluctuation targets and write one CSV row per point.
    Bench {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for sweep.csv; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve an instance exactly.
    Oracle {
        instance: PathBuf,
        #[arg(long, default_value_t = omkd::oracle::DEFAULT_REQUEST_CAP)]
        cap: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_theorem_mode(s: &str) -> std::result::Result<TheoremMode, String> {
    match s {
        "assumptions" => Ok(TheoremMode::Assumptions),
        "guarantee" => Ok(TheoremMode::Guarantee),
        other => Err(format!("unknown check '{other}' (expected assumptions or guarantee)")),
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn execute(command: Command) -> Result<u8> {
    match command {
        Command::Validate { instance, check } => {
            let (report, code) = harness::validate_file(&instance, check)?;
            for v in &report.violations {
                println!("violation: {v}");
            }
            for n in &report.notes {
                println!("note: {n}");
            }
            println!("feasible_for_guarantee: {}", report.feasible_for_guarantee);
            Ok(code as u8)
        }
        Command::Gen { config, variant, seed, requests, ramp, out } => {
            let mut cfg = match config {
                Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
                None => GeneratorConfig::default(),
            };
            cfg.variant = variant.unwrap_or(cfg.variant);
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.requests = requests.unwrap_or(cfg.requests);
            let instance = if ramp { adversarial_density_ramp(&cfg)? } else { generate(&cfg)? };
            emit(&(instance.to_json()? + "\n"), out.as_deref())?;
            Ok(0)
        }
        Command::Run { instance: path, algo, mode, oracle, out } => {
            let instance = harness::load_instance(&path)?;
            let algo: Variant = algo.parse().map_err(omkd::Error::Structure)?;
            let (trace, summary) = harness::run_instance(&instance, &path.display().to_string(), algo, mode, oracle)?;
            if let Some(dir) = &out {
                harness::write_run_outputs(dir, &trace, &summary)?;
            }
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(u8::from(summary.violations > 0))
        }
        Command::Bench { config, seed, out } => {
            let mut sweep = SweepConfig::from_json(&fs::read_to_string(config)?)?;
            sweep.generator.seed = seed.unwrap_or(sweep.generator.seed);
            let rows = harness::bench(&sweep)?;
            let mut buf = Vec::new();
            harness::write_sweep_csv(&rows, &mut buf)?;
            match out {
                Some(dir) => {
                    fs::create_dir_all(&dir)?;
                    fs::write(dir.join("sweep.csv"), &buf)?;
                }
                None => print!("{}", String::from_utf8_lossy(&buf)),
            }
            let failed = rows.iter().any(|r| !r.within_bound() || r.violations > 0);
            Ok(u8::from(failed))
        }
        Command::Oracle { instance, cap, out } => {
            let instance = harness::load_instance(&instance)?;
            let solution = exact_optimum_with_cap(&instance, cap)?;
            emit(&(serde_json::to_string_pretty(&solution)? + "\n"), out.as_deref())?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
