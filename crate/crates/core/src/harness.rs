//! Plumbing behind the command-line tool: instance I/O, single runs with
//! their audits, trace and summary output, and parameter sweeps.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{generate, GeneratorConfig};
use crate::instance::{validate_instance, Instance, TheoremMode, ValidationReport, Variant};
use crate::oracle::{cr_bound_for, empirical_cr, exact_optimum, verify_dual_certificate_against, OfflineSolution};
use crate::trace::{batch_cap_violations, capacity_violations, Mode, RunOptions, Trace};

pub fn load_instance(path: &Path) -> Result<Instance> {
    Instance::from_json(&fs::read_to_string(path)?)
}

pub fn save_instance(instance: &Instance, path: &Path) -> Result<()> {
    let mut text = instance.to_json()?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Report and exit status (0 iff feasible for the guarantee) for `validate`.
pub fn validate_file(path: &Path, mode: TheoremMode) -> Result<(ValidationReport, i32)> {
    let report = validate_instance(&load_instance(path)?, mode);
    let code = if report.feasible_for_guarantee { 0 } else { 1 };
    Ok((report, code))
}

/// Runs the algorithm for `algo` on `instance`.
pub fn run_algorithm(instance: &Instance, algo: Variant, options: &RunOptions) -> Result<Trace> {
    if instance.variant != algo {
        return Err(Error::VariantMismatch { expected: algo, found: instance.variant });
    }
    match algo {
        Variant::Basic => crate::basic::run_with(instance, options),
        Variant::LoadBalance => crate::lb::run_lb_with(instance, options),
        Variant::MultiDim => crate::md::run_md_with(instance, options),
    }
}

/// Post-run checks on a finished trace.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Audit {
    pub capacity: usize,
    pub batch_caps: usize,
    pub dual_constraints: usize,
    pub closed_form: usize,
    pub step_ratio: usize,
    /// `P <= OPT <= D` (or `P <= D` without an optimum) failed.
    pub sandwich: usize,
}

impl Audit {
    pub fn total(&self) -> usize {
        self.capacity + self.batch_caps + self.dual_constraints + self.closed_form + self.step_ratio + self.sandwich
    }
}

pub fn audit(instance: &Instance, trace: &Trace, offline: Option<&OfflineSolution>) -> Audit {
    let cert = verify_dual_certificate_against(instance, trace, offline);
    Audit {
        capacity: capacity_violations(instance, &trace.assignment).len(),
        batch_caps: if instance.variant == Variant::LoadBalance {
            batch_cap_violations(instance, &trace.assignment).len()
        } else {
            0
        },
        dual_constraints: cert.violations.len() + cert.negative_prices,
        closed_form: usize::from(!trace.prices.closed_form_gap(&trace.pricing, &instance.resources).holds()),
        step_ratio: trace.ratio_bound_violations().len(),
        sandwich: usize::from(!cert.sandwich_holds),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub instance: String,
    pub seed: Option<u64>,
    pub variant: Variant,
    pub mode: Mode,
    pub requests: usize,
    pub admitted: usize,
    pub blocked: usize,
    pub primal: f64,
    pub dual: f64,
    pub offline: Option<f64>,
    pub empirical_cr: Option<f64>,
    pub cr_bound: f64,
    pub max_step_ratio: Option<f64>,
    pub audit: Audit,
    pub violations: usize,
    pub wall_time_ms: f64,
}

/// Runs `algo`, optionally solves the offline problem, and audits the result.
pub fn run_instance(
    instance: &Instance,
    label: &str,
    algo: Variant,
    mode: Mode,
    with_oracle: bool,
) -> Result<(Trace, RunSummary)> {
    let start = Instant::now();
    let trace = run_algorithm(instance, algo, &RunOptions { mode, pricing: None })?;
    let offline = if with_oracle { Some(exact_optimum(instance)?) } else { None };
    let audit = audit(instance, &trace, offline.as_ref());
    let summary = RunSummary {
        instance: label.to_string(),
        seed: None,
        variant: instance.variant,
        mode,
        requests: instance.num_requests(),
        admitted: trace.admitted(),
        blocked: trace.blocked(),
        primal: trace.primal,
        dual: trace.dual,
        offline: offline.as_ref().map(|o| o.value),
        empirical_cr: offline.as_ref().map(|o| empirical_cr(trace.primal, o.value)),
        cr_bound: cr_bound_for(&trace.pricing),
        max_step_ratio: trace.max_step_ratio(),
        violations: audit.total(),
        audit,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    Ok((trace, summary))
}

#[derive(Serialize)]
struct TraceRow {
    step: usize,
    request_id: usize,
    outcome: &'static str,
    k_star: Option<usize>,
    residual: f64,
    #[serde(rename = "dP")]
    d_p: f64,
    #[serde(rename = "dD")]
    d_d: f64,
    running_p: f64,
    running_d: f64,
}

/// Per-step CSV with columns
/// `step,request_id,outcome,k_star,residual,dP,dD,running_P,running_D`.
pub fn write_trace_csv<W: Write>(trace: &Trace, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(["step", "request_id", "outcome", "k_star", "residual", "dP", "dD", "running_P", "running_D"])?;
    let (mut p, mut d) = (0.0, 0.0);
    for dec in &trace.decisions {
        p += dec.delta_primal;
        d += dec.delta_dual;
        w.serialize(TraceRow {
            step: dec.step,
            request_id: dec.request,
            outcome: dec.outcome.label(),
            k_star: dec.k_star,
            residual: dec.residual,
            d_p: dec.delta_primal,
            d_d: dec.delta_dual,
            running_p: p,
            running_d: d,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn trace_csv_string(trace: &Trace) -> Result<String> {
    let mut buf = Vec::new();
    write_trace_csv(trace, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// Writes `trace.csv` and `summary.json` into `dir`.
pub fn write_run_outputs(dir: &Path, trace: &Trace, summary: &RunSummary) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_trace_csv(trace, fs::File::create(dir.join("trace.csv"))?)?;
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(summary)? + "\n")?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub density_ratio: f64,
    pub duration_ratio: f64,
    /// Multi-dimensional only; the generator default is used when absent.
    #[serde(default)]
    pub xi: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    #[default]
    Random,
    /// [`crate::generators::adversarial_density_ramp`]; basic variant only.
    Ramp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub generator: GeneratorConfig,
    pub grid: Vec<GridPoint>,
    pub reps: usize,
    #[serde(default)]
    pub family: Family,
    #[serde(default)]
    pub mode: Mode,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Generator config for one replicate; replicate `r` uses seed
    /// `generator.seed + r` at every grid point.
    pub fn point_config(&self, point: &GridPoint, rep: usize) -> GeneratorConfig {
        GeneratorConfig {
            seed: self.generator.seed.wrapping_add(rep as u64),
            density_ratio: point.density_ratio,
            duration_ratio: point.duration_ratio,
            xi: point.xi.unwrap_or(self.generator.xi),
            ..self.generator.clone()
        }
    }

    pub fn instance(&self, point: &GridPoint, rep: usize) -> Result<Instance> {
        let cfg = self.point_config(point, rep);
        match self.family {
            Family::Random => generate(&cfg),
            Family::Ramp => crate::generators::adversarial_density_ramp(&cfg),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub variant: Variant,
    pub density_ratio: f64,
    pub duration_ratio: f64,
    pub xi: Option<f64>,
    pub reps: usize,
    pub mean_cr: f64,
    pub max_cr: f64,
    pub cr_bound: f64,
    pub max_step_ratio: f64,
    pub violations: usize,
}

impl SweepRow {
    pub fn within_bound(&self) -> bool {
        self.max_cr <= self.cr_bound
    }
}

/// Generates `reps` instances per grid point and runs the algorithm and the
/// oracle on each. Instances are processed in parallel; rows come back in
/// grid order.
pub fn bench(config: &SweepConfig) -> Result<Vec<SweepRow>> {
    let jobs: Vec<(usize, usize)> =
        (0..config.grid.len()).flat_map(|g| (0..config.reps).map(move |r| (g, r))).collect();
    let results: Vec<RunSummary> = jobs
        .par_iter()
        .map(|&(g, r)| {
            let instance = config.instance(&config.grid[g], r)?;
            let label = format!("grid{g}-rep{r}");
            let (_, mut summary) = run_instance(&instance, &label, instance.variant, config.mode, true)?;
            summary.seed = Some(config.point_config(&config.grid[g], r).seed);
            Ok(summary)
        })
        .collect::<Result<_>>()?;

    Ok(config
        .grid
        .iter()
        .zip(results.chunks(config.reps.max(1)))
        .map(|(point, runs)| {
            let crs: Vec<f64> = runs.iter().filter_map(|s| s.empirical_cr).collect();
            SweepRow {
                variant: config.generator.variant,
                density_ratio: point.density_ratio,
                duration_ratio: point.duration_ratio,
                xi: (config.generator.variant == Variant::MultiDim)
                    .then(|| point.xi.unwrap_or(config.generator.xi)),
                reps: runs.len(),
                mean_cr: if crs.is_empty() { f64::NAN } else { crs.iter().sum::<f64>() / crs.len() as f64 },
                max_cr: crs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                cr_bound: runs.iter().map(|s| s.cr_bound).fold(f64::NEG_INFINITY, f64::max),
                max_step_ratio: runs.iter().filter_map(|s| s.max_step_ratio).fold(0.0, f64::max),
                violations: runs.iter().map(|s| s.violations).sum(),
            }
        })
        .collect())
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_has_one_row_per_request() {
        let inst = generate(&GeneratorConfig { seed: 3, ..Default::default() }).unwrap();
        let (trace, summary) = run_instance(&inst, "t", Variant::Basic, Mode::Strict, true).unwrap();
        let csv = trace_csv_string(&trace).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("step,request_id,outcome,k_star,residual,dP,dD,running_P,running_D"));
        assert_eq!(lines.count(), inst.num_requests());
        assert_eq!(summary.violations, 0, "{:?}", summary.audit);
        assert!(summary.offline.is_some() && summary.empirical_cr.is_some());
    }

    #[test]
    fn algorithm_must_match_variant() {
        let inst = generate(&GeneratorConfig::default()).unwrap();
        let err = run_instance(&inst, "t", Variant::MultiDim, Mode::Strict, false).unwrap_err();
        assert!(matches!(err, Error::VariantMismatch { .. }));
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn one_point_one_rep() {
        let cfg = SweepConfig {
            generator: GeneratorConfig { requests: 6, ..Default::default() },
            grid: vec![GridPoint { density_ratio: 2.0, duration_ratio: 2.0, xi: None }],
            reps: 1,
            family: Family::Random,
            mode: Mode::Strict,
        };
        let rows = bench(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].within_bound());
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2);
    }

    #[test]
    fn bound_column_increases_along_density_axis() {
        let cfg = SweepConfig {
            generator: GeneratorConfig { requests: 5, ..Default::default() },
            grid: [1.0, 2.0, 4.0, 8.0]
                .iter()
                .map(|&r| GridPoint { density_ratio: r, duration_ratio: 1.0, xi: None })
                .collect(),
            reps: 2,
            family: Family::Random,
            mode: Mode::Strict,
        };
        let rows = bench(&cfg).unwrap();
        assert!(rows.windows(2).all(|w| w[0].cr_bound < w[1].cr_bound));
    }
}
