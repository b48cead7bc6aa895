//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use common::{sampled, VARIANTS};
use omkd::assignment::solve_batch_assignment;
use omkd::generators::GeneratorConfig;
use omkd::harness::{bench, trace_csv_string, Family, GridPoint, SweepConfig};
use omkd::instance::{validate_instance, TheoremMode};
use omkd::lb::BatchResult;
use omkd::oracle::verify_dual_certificate;
use omkd::trace::{batch_cap_violations, capacity_violations};
use omkd::{basic, lb, md, DeclaredBounds, Decision, Instance, Mode, Observer, PriceState, PricingTable, RunOptions, Trace, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn run(instance: &Instance, observer: &mut dyn Observer) -> Trace {
    let options = RunOptions::default();
    match instance.variant {
        Variant::Basic => basic::run_observed(instance, &options, observer),
        Variant::LoadBalance => lb::run_lb_observed(instance, &options, observer),
        Variant::MultiDim => md::run_md_observed(instance, &options, observer),
    }
    .expect("run succeeds on generated instances")
}

/// Checks the closed-form price identity after every step and batch.
struct ClosedFormWatch<'a> {
    pricing: PricingTable,
    instance: &'a Instance,
    checks: usize,
    worst: f64,
}

impl ClosedFormWatch<'_> {
    fn check(&mut self, prices: &PriceState) {
        let gap = prices.closed_form_gap(&self.pricing, &self.instance.resources);
        self.checks += 1;
        self.worst = self.worst.max(gap.max_relative);
    }
}

impl Observer for ClosedFormWatch<'_> {
    fn after_step(&mut self, _: &Decision, prices: &PriceState) {
        self.check(prices);
    }
    fn after_batch(&mut self, _: &BatchResult, prices: &PriceState) {
        self.check(prices);
    }
}

const CORPUS: u64 = 1000;

fn closed_form() -> Outcome {
    let start = Instant::now();
    let mut checks = 0;
    let mut worst = 0.0f64;
    for variant in VARIANTS {
        for seed in 0..CORPUS {
            let inst = sampled(variant, seed, 20, 3);
            let mut watch = ClosedFormWatch {
                pricing: PricingTable::for_instance(&inst).unwrap(),
                instance: &inst,
                checks: 0,
                worst: 0.0,
            };
            run(&inst, &mut watch);
            checks += watch.checks;
            worst = worst.max(watch.worst);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let rel_ok = worst <= omkd::pricing::CLOSED_FORM_REL;
    outcome(
        rel_ok && secs < 60.0,
        format!("{} instances, {checks} step checks, worst scaled gap {worst:.2e}, {secs:.1}s", 3 * CORPUS),
    )
}

fn step_ratio() -> Outcome {
    let mut admitted = 0;
    let mut bad = Vec::new();
    let mut max_ratio_to_bound = 0.0f64;
    for variant in VARIANTS {
        for seed in 0..CORPUS {
            let inst = sampled(variant, seed, 20, 3);
            let t = run(&inst, &mut ());
            admitted += t.admitted();
            let v = t.ratio_bound_violations();
            if !v.is_empty() {
                bad.push((variant, seed, v));
            }
            let bound = 2.0 * t.pricing.gamma_max() / std::f64::consts::LN_2;
            if let Some(r) = t.max_step_ratio() {
                if variant == Variant::LoadBalance {
                    let worst = t.batches.iter().filter_map(BatchResult::ratio).fold(0.0, f64::max);
                    max_ratio_to_bound = max_ratio_to_bound.max(worst / bound);
                } else {
                    max_ratio_to_bound = max_ratio_to_bound.max(r / bound);
                }
            }
        }
    }
    outcome(
        bad.is_empty(),
        format!(
            "{admitted} admissions, {} instances over the bound, largest ratio/bound {max_ratio_to_bound:.3}{}",
            bad.len(),
            bad.first().map(|b| format!(", first: {b:?}")).unwrap_or_default()
        ),
    )
}

fn primal_feasibility() -> Outcome {
    let mut noncompliant = 0;
    let mut overloads = 0;
    let mut cap_breaches = 0;
    let mut instances = 0;
    for variant in VARIANTS {
        for seed in 0..CORPUS {
            let inst = sampled(variant, seed, 20, 3);
            if !validate_instance(&inst, TheoremMode::Guarantee).feasible_for_guarantee {
                noncompliant += 1;
                continue;
            }
            instances += 1;
            let t = run(&inst, &mut ());
            overloads += capacity_violations(&inst, &t.assignment).len();
            if variant == Variant::LoadBalance {
                cap_breaches += batch_cap_violations(&inst, &t.assignment).len();
            }
        }
    }
    outcome(
        noncompliant == 0 && overloads == 0 && cap_breaches == 0,
        format!(
            "{instances} compliant instances ({noncompliant} failed validation), {overloads} overloaded slots, {cap_breaches} batch-cap breaches"
        ),
    )
}

fn dual_certificates() -> Outcome {
    let per_variant = 300;
    let reports: Vec<_> = VARIANTS
        .iter()
        .flat_map(|&v| (0..per_variant).map(move |s| (v, s)))
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&(variant, seed)| {
            let inst = sampled(variant, 10_000 + seed, 12, 3);
            let t = run(&inst, &mut ());
            let report = verify_dual_certificate(&inst, &t).unwrap();
            let incremental_ok = (t.dual - report.dual_objective).abs() <= 1e-6 * report.dual_objective.abs().max(1.0);
            (variant, seed, report, incremental_ok)
        })
        .collect();
    let invalid: Vec<_> = reports.iter().filter(|r| !r.2.is_valid() || !r.3).collect();
    let max_violation = reports.iter().map(|r| r.2.max_violation).fold(0.0, f64::max);
    let tight = reports.iter().filter(|r| r.2.offline.is_some_and(|o| o > r.2.primal)).count();
    outcome(
        invalid.is_empty() && reports.iter().all(|r| r.2.offline.is_some()),
        format!(
            "{} instances with |N| <= 12, |K| <= 3, {} failures, max violation {max_violation:.2e}, online below optimum on {tight}",
            reports.len(),
            invalid.len()
        ),
    )
}

fn enumerate_batch(r: &[Vec<Option<f64>>], q: &[u32]) -> f64 {
    fn go(i: usize, r: &[Vec<Option<f64>>], load: &mut [u32], q: &[u32], value: f64, best: &mut f64) {
        if i == r.len() {
            *best = best.max(value);
            return;
        }
        go(i + 1, r, load, q, value, best);
        for k in 0..q.len() {
            if let Some(x) = r[i][k] {
                if load[k] < q[k] {
                    load[k] += 1;
                    go(i + 1, r, load, q, value + x, best);
                    load[k] -= 1;
                }
            }
        }
    }
    let mut best = 0.0;
    go(0, r, &mut vec![0; q.len()], q, 0.0, &mut best);
    best
}

fn batch_lp() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let trials = 600;
    let mut failures = Vec::new();
    for trial in 0..trials {
        let rows = rng.gen_range(0..=6);
        let cols = rng.gen_range(1..=4);
        // Small integer grids produce many ties; continuous draws do not.
        let integer = rng.gen_bool(0.3);
        let r: Vec<Vec<Option<f64>>> = (0..rows)
            .map(|_| {
                (0..cols)
                    .map(|_| {
                        rng.gen_bool(0.8).then(|| {
                            if integer {
                                f64::from(rng.gen_range(-2..=5))
                            } else {
                                rng.gen_range(-3.0..10.0)
                            }
                        })
                    })
                    .collect()
            })
            .collect();
        let q: Vec<u32> = (0..cols).map(|_| rng.gen_range(1..=3)).collect();
        let sol = solve_batch_assignment(&r, &q);
        let expected = enumerate_batch(&r, &q);
        let scale = expected.abs().max(1.0);

        let mut load = vec![0; cols];
        let mut feasible = true;
        let mut value = 0.0;
        for (n, a) in sol.assignment.iter().enumerate() {
            if let Some(k) = *a {
                load[k] += 1;
                match r[n][k] {
                    Some(x) => value += x,
                    None => feasible = false,
                }
            }
        }
        feasible &= load.iter().zip(&q).all(|(l, q)| l <= q);
        let dual_feasible = sol.u.iter().chain(&sol.h).all(|&x| x >= 0.0)
            && r.iter().enumerate().all(|(n, row)| {
                row.iter()
                    .enumerate()
                    .all(|(k, x)| x.map_or(true, |x| sol.u[n] + sol.h[k] >= x - 1e-9 * x.abs().max(1.0)))
            });
        let ok = feasible
            && dual_feasible
            && (value - expected).abs() <= 1e-6 * scale
            && (sol.primal - value).abs() <= 1e-9 * scale
            && (sol.primal - sol.dual).abs() <= 1e-6 * sol.primal.abs().max(1.0);
        if !ok {
            failures.push(trial);
        }
    }
    outcome(
        failures.is_empty(),
        format!("{trials} matrices (|N| <= 6, |K| <= 4), {} mismatches{}", failures.len(), if failures.is_empty() { String::new() } else { format!(": {failures:?}") }),
    )
}

fn grid(pairs: &[(f64, f64)], xi: Option<f64>) -> Vec<GridPoint> {
    pairs.iter().map(|&(density_ratio, duration_ratio)| GridPoint { density_ratio, duration_ratio, xi }).collect()
}

fn cr_sweeps() -> Outcome {
    // theta_bar * d_bar in {1, 4, 16, 64}.
    let pairs = [(1.0, 1.0), (4.0, 1.0), (2.0, 2.0), (16.0, 1.0), (4.0, 4.0), (64.0, 1.0), (16.0, 4.0), (8.0, 8.0)];
    let base = GeneratorConfig { resources: 2, requests: 10, horizon: 12, capacity: [0.5, 2.0], weight_spread: 2.0, ..Default::default() };
    let sweeps = vec![
        ("basic/random", SweepConfig { generator: base.clone(), grid: grid(&pairs, None), reps: 20, family: Family::Random, mode: Mode::Strict }),
        (
            "basic/ramp",
            SweepConfig {
                generator: GeneratorConfig { resources: 1, requests: 10, horizon: 16, ..base.clone() },
                grid: grid(&pairs, None),
                reps: 1,
                family: Family::Ramp,
                mode: Mode::Strict,
            },
        ),
        (
            "lb/random",
            SweepConfig {
                generator: GeneratorConfig { variant: Variant::LoadBalance, q: [1, 3], batch_size: 3, horizon: 16, ..base.clone() },
                grid: grid(&pairs, None),
                reps: 20,
                family: Family::Random,
                mode: Mode::Strict,
            },
        ),
        (
            "md/random xi=2",
            SweepConfig {
                generator: GeneratorConfig { variant: Variant::MultiDim, dims: [1, 2], ..base.clone() },
                grid: grid(&pairs, Some(2.0)),
                reps: 20,
                family: Family::Random,
                mode: Mode::Strict,
            },
        ),
        (
            "md/random xi=4",
            SweepConfig {
                generator: GeneratorConfig { variant: Variant::MultiDim, dims: [2, 3], ..base },
                grid: grid(&pairs, Some(4.0)),
                reps: 20,
                family: Family::Random,
                mode: Mode::Strict,
            },
        ),
    ];
    let mut all_ok = true;
    let mut points = 0;
    let mut worst = 0.0f64;
    for (name, sweep) in &sweeps {
        let rows = bench(sweep).expect("sweep runs");
        for row in &rows {
            points += 1;
            all_ok &= row.within_bound() && row.violations == 0;
            worst = worst.max(row.max_cr / row.cr_bound);
            println!(
                "    {name:<16} theta_bar={:<4} d_bar={:<3} mean_cr={:.4} max_cr={:.4} bound={:.4} violations={}",
                row.density_ratio, row.duration_ratio, row.mean_cr, row.max_cr, row.cr_bound, row.violations
            );
        }
    }
    outcome(all_ok, format!("{points} grid points, largest max_cr/bound {worst:.3}"))
}

fn as_multi_dim(instance: &Instance) -> Instance {
    let bounds: BTreeMap<usize, DeclaredBounds> = instance
        .declared_bounds
        .iter()
        .map(|(&k, b)| (k, DeclaredBounds { theta: None, d: b.d, rho: b.theta, xi: Some(1.0) }))
        .collect();
    instance.with_variant(Variant::MultiDim).unwrap().with_declared_bounds(bounds).unwrap()
}

fn without_batch(d: &Decision) -> Decision {
    Decision { batch: None, ..d.clone() }
}

fn reductions() -> Outcome {
    let n = 250;
    let mut md_mismatch = Vec::new();
    let mut lb_mismatch = Vec::new();
    for seed in 0..n {
        let inst = sampled(Variant::Basic, 20_000 + seed, 20, 3);
        let a = basic::run(&inst).unwrap();
        let b = md::run_md(&as_multi_dim(&inst)).unwrap();
        if a.decisions != b.decisions || a.pricing != b.pricing {
            md_mismatch.push(seed);
        }

        let mut cfg = common::sampled_config(Variant::LoadBalance, 30_000 + seed, 20, 3);
        cfg.batch_size = 1;
        if seed % 2 == 0 {
            cfg.q = [cfg.requests as u32; 2];
        }
        let inst = omkd::generators::generate(&cfg).unwrap();
        let a = lb::run_lb(&inst).unwrap();
        let b = basic::run(&inst.with_variant(Variant::Basic).unwrap()).unwrap();
        let same = a.decisions.iter().map(without_batch).eq(b.decisions.iter().cloned())
            && a.assignment == b.assignment
            && a.pricing == b.pricing;
        if !same {
            lb_mismatch.push(seed);
        }
    }
    outcome(
        md_mismatch.is_empty() && lb_mismatch.is_empty(),
        format!("{n} instances each; md vs basic mismatches {md_mismatch:?}, lb vs basic mismatches {lb_mismatch:?}"),
    )
}

fn determinism() -> Outcome {
    let mut diffs = 0;
    let mut runs = 0;
    for variant in VARIANTS {
        for seed in 0..50 {
            let cfg = common::sampled_config(variant, 40_000 + seed, 20, 3);
            let a = omkd::generators::generate(&cfg).unwrap();
            let b = omkd::generators::generate(&cfg).unwrap();
            let json = a.to_json().unwrap();
            diffs += usize::from(json != b.to_json().unwrap());
            let reloaded = Instance::from_json(&json).unwrap();
            let csv = |i: &Instance| trace_csv_string(&run(i, &mut ())).unwrap();
            let first = csv(&a);
            diffs += usize::from(first != csv(&a)) + usize::from(first != csv(&reloaded));
            runs += 3;
        }
    }
    let sweep = SweepConfig {
        generator: GeneratorConfig { requests: 8, ..Default::default() },
        grid: grid(&[(1.0, 1.0), (4.0, 2.0), (16.0, 4.0)], None),
        reps: 8,
        family: Family::Random,
        mode: Mode::Strict,
    };
    let sweep_csv = || {
        let mut buf = Vec::new();
        omkd::harness::write_sweep_csv(&bench(&sweep).unwrap(), &mut buf).unwrap();
        buf
    };
    diffs += usize::from(sweep_csv() != sweep_csv());
    outcome(diffs == 0, format!("{runs} trace comparisons plus a parallel sweep, {diffs} differences"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 closed-form price identity", closed_form),
        ("2 per-step dual/primal ratio", step_ratio),
        ("3 primal feasibility", primal_feasibility),
        ("4 dual feasibility and weak duality", dual_certificates),
        ("5 batch LP oracle equivalence", batch_lp),
        ("6 empirical CR within bound", cr_sweeps),
        ("7 reduction equivalences", reductions),
        ("8 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let result = check();
        let status = if result.passed { "PASS" } else { "FAIL" };
        println!("{status} criterion {name}: {} [{:.1}s]", result.detail, start.elapsed().as_secs_f64());
        failed += usize::from(!result.passed);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
