//! Seeded random instance families. Every generated instance declares the
//! bounds it was drawn under, so the pricing parameters (and with them the
//! weight caps) are known before any offer is sampled.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{guarantee_weight_cap, DeclaredBounds, Instance, Offer, Request, Resource, Variant};
use crate::pricing::{gamma_basic, gamma_md};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    /// Every weight respects the theorem precondition for its variant.
    #[default]
    Compliant,
    /// As compliant, except request 0's first offer is scaled up until one
    /// dimension carries the full capacity.
    Violating,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub variant: Variant,
    pub resources: usize,
    pub requests: usize,
    pub horizon: u32,
    /// Capacity range, per resource and dimension.
    pub capacity: [f64; 2],
    /// Lower density bound (theta or rho).
    pub density_min: f64,
    /// Target density fluctuation.
    pub density_ratio: f64,
    pub duration_min: u32,
    /// Target duration fluctuation; the longest duration is
    /// `floor(duration_min * duration_ratio)`.
    pub duration_ratio: f64,
    /// Target total demand fluctuation (multi-dimensional only).
    pub xi: f64,
    pub weight_mode: WeightMode,
    /// Weights are log-uniform in `[cap / weight_spread, cap]`.
    pub weight_spread: f64,
    /// Largest batch (load balancing only).
    pub batch_size: usize,
    /// Range of per-batch caps `q_k` (load balancing only).
    pub q: [u32; 2],
    /// Range of dimension counts (multi-dimensional only).
    pub dims: [usize; 2],
    /// Probability that a request makes an offer for a given resource. Each
    /// request offers for at least one resource.
    pub offer_probability: f64,
    /// Largest gap between arrival and service start.
    pub max_delay: u32,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            variant: Variant::Basic,
            resources: 2,
            requests: 10,
            horizon: 24,
            capacity: [1.0, 4.0],
            density_min: 1.0,
            density_ratio: 4.0,
            duration_min: 1,
            duration_ratio: 4.0,
            xi: 3.0,
            weight_mode: WeightMode::Compliant,
            weight_spread: 4.0,
            batch_size: 3,
            q: [1, 2],
            dims: [2, 2],
            offer_probability: 0.7,
            max_delay: 2,
        }
    }
}

// Independent streams per field group.
const STREAM_RESOURCES: u64 = 0;
const STREAM_ARRIVALS: u64 = 1;
const STREAM_OFFERS: u64 = 2;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return lo;
    }
    (lo.ln() + rng.gen::<f64>() * (hi / lo).ln()).exp().clamp(lo, hi)
}

impl GeneratorConfig {
    fn config_error<S: Into<String>>(msg: S) -> Error {
        Error::Config(msg.into())
    }

    /// Longest duration the config allows.
    pub fn duration_max(&self) -> u32 {
        (f64::from(self.duration_min) * self.duration_ratio + 1e-9).floor() as u32
    }

    pub fn density_max(&self) -> f64 {
        self.density_min * self.density_ratio
    }

    fn check(&self) -> Result<()> {
        if !(self.density_ratio >= 1.0 && self.density_ratio.is_finite()) {
            return Err(Self::config_error(format!("density ratio must be >= 1, got {}", self.density_ratio)));
        }
        if !(self.duration_ratio >= 1.0 && self.duration_ratio.is_finite()) {
            return Err(Self::config_error(format!("duration ratio must be >= 1, got {}", self.duration_ratio)));
        }
        if !(self.density_min > 0.0 && self.density_min.is_finite()) {
            return Err(Self::config_error("density_min must be positive"));
        }
        if self.duration_min == 0 {
            return Err(Self::config_error("duration_min must be at least 1"));
        }
        if self.resources == 0 {
            return Err(Self::config_error("at least one resource is required"));
        }
        if self.horizon < self.duration_max() {
            return Err(Self::config_error(format!("horizon {} shorter than the longest duration {}", self.horizon, self.duration_max())));
        }
        let [c0, c1] = self.capacity;
        if !(c0 > 0.0 && c0 <= c1 && c1.is_finite()) {
            return Err(Self::config_error("capacity range must satisfy 0 < min <= max"));
        }
        if !(self.weight_spread >= 1.0 && self.weight_spread.is_finite()) {
            return Err(Self::config_error("weight_spread must be >= 1"));
        }
        if !(self.offer_probability > 0.0 && self.offer_probability <= 1.0) {
            return Err(Self::config_error("offer_probability must lie in (0, 1]"));
        }
        match self.variant {
            Variant::LoadBalance => {
                if self.q[0] == 0 || self.q[0] > self.q[1] {
                    return Err(Self::config_error("q range must satisfy 1 <= min <= max"));
                }
                if self.batch_size == 0 {
                    return Err(Self::config_error("batch_size must be at least 1"));
                }
            }
            Variant::MultiDim => {
                if self.dims[0] == 0 || self.dims[0] > self.dims[1] {
                    return Err(Self::config_error("dims range must satisfy 1 <= min <= max"));
                }
                if !(self.xi >= self.dims[1] as f64) {
                    return Err(Self::config_error(format!(
                        "xi {} below the dimension count {}; all-positive weights force xi >= dims",
                        self.xi, self.dims[1]
                    )));
                }
            }
            Variant::Basic => {}
        }
        Ok(())
    }

    fn gamma(&self) -> Result<f64> {
        let dr = f64::from(self.duration_max()) / f64::from(self.duration_min);
        match self.variant {
            Variant::MultiDim => gamma_md(self.density_ratio, dr, self.xi),
            _ => gamma_basic(self.density_ratio, dr),
        }
    }

    fn declared(&self) -> DeclaredBounds {
        let density = Some([self.density_min, self.density_max()]);
        let d = Some([f64::from(self.duration_min), f64::from(self.duration_max())]);
        match self.variant {
            Variant::MultiDim => DeclaredBounds { rho: density, d, xi: Some(self.xi), ..Default::default() },
            _ => DeclaredBounds { theta: density, d, ..Default::default() },
        }
    }
}

/// Draws an instance from `config`. Deterministic in `config.seed`.
pub fn generate(config: &GeneratorConfig) -> Result<Instance> {
    config.check()?;
    let gamma = config.gamma()?;
    let horizon = config.horizon;
    let (d_lo, d_hi) = (config.duration_min, config.duration_max());

    let mut rng = rng_for(config.seed, STREAM_RESOURCES);
    let resources: Vec<Resource> = (0..config.resources)
        .map(|id| {
            let dims = match config.variant {
                Variant::MultiDim => rng.gen_range(config.dims[0]..=config.dims[1]),
                _ => 1,
            };
            let capacities = (0..dims).map(|_| rng.gen_range(config.capacity[0]..=config.capacity[1])).collect();
            let q = (config.variant == Variant::LoadBalance).then(|| rng.gen_range(config.q[0]..=config.q[1]));
            Resource { id, capacities, q }
        })
        .collect();

    let latest_arrival = horizon - d_hi;
    let mut rng = rng_for(config.seed, STREAM_ARRIVALS);
    let arrivals: Vec<u32> = match config.variant {
        Variant::LoadBalance => {
            let mut sizes = Vec::new();
            let mut left = config.requests;
            while left > 0 {
                let s = rng.gen_range(1..=config.batch_size.min(left));
                sizes.push(s);
                left -= s;
            }
            let slots = latest_arrival as usize + 1;
            if sizes.len() > slots {
                return Err(Error::Config(format!(
                    "{} batches need distinct arrival slots but only {slots} are available",
                    sizes.len()
                )));
            }
            let mut times: Vec<u32> = sample(&mut rng, slots, sizes.len()).into_iter().map(|t| t as u32).collect();
            times.sort_unstable();
            sizes.iter().zip(&times).flat_map(|(&s, &t)| std::iter::repeat(t).take(s)).collect()
        }
        _ => {
            let mut a: Vec<u32> = (0..config.requests).map(|_| rng.gen_range(0..=latest_arrival)).collect();
            a.sort_unstable();
            a
        }
    };

    let mut rng = rng_for(config.seed, STREAM_OFFERS);
    let mut requests = Vec::with_capacity(config.requests);
    for (id, &arrival) in arrivals.iter().enumerate() {
        let mut chosen: Vec<usize> =
            (0..config.resources).filter(|_| rng.gen_bool(config.offer_probability)).collect();
        if chosen.is_empty() {
            chosen.push(rng.gen_range(0..config.resources));
        }
        let mut offers = BTreeMap::new();
        for k in chosen {
            let res = &resources[k];
            let dims = res.dims();
            // Relative weight profile: one dimension at 1, the rest in [1, r],
            // so the total demand fluctuation stays within xi.
            let spread = if dims > 1 { ((config.xi - 1.0) / (dims - 1) as f64).max(1.0) } else { 1.0 };
            let anchor = rng.gen_range(0..dims);
            let profile: Vec<f64> =
                (0..dims).map(|m| if m == anchor { 1.0 } else { rng.gen_range(1.0..=spread) }).collect();
            let caps: Vec<f64> = res
                .capacities
                .iter()
                .map(|&c| guarantee_weight_cap(config.variant, c, gamma, res.q))
                .collect();
            let base_cap = caps.iter().zip(&profile).map(|(c, p)| c / p).fold(f64::INFINITY, f64::min);
            let base = log_uniform(&mut rng, base_cap / config.weight_spread, base_cap);
            let w: Vec<f64> = profile.iter().zip(&caps).map(|(p, &c)| (base * p).min(c)).collect();

            let mut s = Vec::with_capacity(dims);
            let mut d = Vec::with_capacity(dims);
            for _ in 0..dims {
                let dur = rng.gen_range(d_lo..=d_hi);
                let slack = (horizon - dur - arrival).min(config.max_delay);
                s.push(arrival + rng.gen_range(0..=slack));
                d.push(dur);
            }
            let density = log_uniform(&mut rng, config.density_min, config.density_max());
            let weight_time: f64 = w.iter().zip(&d).map(|(w, &d)| w * f64::from(d)).sum();
            offers.insert(k, Offer { v: density * weight_time, w, s, d });
        }
        requests.push(Request { id, arrival, offers });
    }

    if config.weight_mode == WeightMode::Violating {
        if let Some(req) = requests.first_mut() {
            if let Some((&k, offer)) = req.offers.iter_mut().next() {
                let caps = &resources[k].capacities;
                let f = caps.iter().zip(&offer.w).map(|(c, w)| c / w).fold(f64::INFINITY, f64::min);
                offer.w.iter_mut().for_each(|w| *w *= f);
                offer.v *= f;
            }
        }
    }

    let bounds = (0..config.resources).map(|k| (k, config.declared())).collect();
    Instance::new(horizon, config.variant, resources, requests)?.with_declared_bounds(bounds)
}

/// Basic-variant stress family: every interval covers the middle slot, and
/// requests arrive from the least dense and longest to the densest and
/// shortest. Densities ramp geometrically across the full declared range and
/// durations shrink linearly, so the realized fluctuations equal the targets
/// whenever there are at least two requests. Weights sit at the compliant cap.
pub fn adversarial_density_ramp(config: &GeneratorConfig) -> Result<Instance> {
    if config.variant != Variant::Basic {
        return Err(Error::Config("the density ramp is defined for the basic variant".into()));
    }
    config.check()?;
    let d_hi = config.duration_max();
    let d_lo = config.duration_min;
    if (f64::from(d_hi) / f64::from(d_lo) - config.duration_ratio).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "duration ratio {} is not reachable with integer durations from {d_lo}",
            config.duration_ratio
        )));
    }
    let t0 = config.horizon / 2;
    if t0 < (d_hi - 1) / 2 || t0 + d_hi - (d_hi - 1) / 2 > config.horizon {
        return Err(Error::Config(format!("horizon {} too short to centre duration {d_hi}", config.horizon)));
    }
    let gamma = config.gamma()?;
    let capacity = config.capacity[0];
    let w = guarantee_weight_cap(Variant::Basic, capacity, gamma, None);
    let resources: Vec<Resource> = (0..config.resources).map(|k| Resource::single(k, capacity)).collect();

    let n = config.requests;
    let requests = (0..n)
        .map(|j| {
            let x = if n > 1 { j as f64 / (n - 1) as f64 } else { 0.0 };
            let density = if j + 1 == n && n > 1 {
                config.density_max()
            } else {
                config.density_min * config.density_ratio.powf(x)
            };
            let d = d_hi - ((f64::from(d_hi - d_lo) * x).round() as u32);
            let s = t0 - (d - 1) / 2;
            let offer = Offer::single(density * w * f64::from(d), w, s, d);
            Request { id: j, arrival: 0, offers: (0..config.resources).map(|k| (k, offer.clone())).collect() }
        })
        .collect();

    let bounds = (0..config.resources).map(|k| (k, config.declared())).collect();
    Instance::new(config.horizon, Variant::Basic, resources, requests)?.with_declared_bounds(bounds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{fluctuation_stats, validate_instance, Rule, TheoremMode};

    fn config(variant: Variant) -> GeneratorConfig {
        GeneratorConfig { variant, seed: 7, ..Default::default() }
    }

    #[test]
    fn same_seed_same_json() {
        for v in [Variant::Basic, Variant::LoadBalance, Variant::MultiDim] {
            let a = generate(&config(v)).unwrap().to_json().unwrap();
            let b = generate(&config(v)).unwrap().to_json().unwrap();
            assert_eq!(a, b);
            let c = generate(&GeneratorConfig { seed: 8, ..config(v) }).unwrap().to_json().unwrap();
            assert_ne!(a, c);
        }
    }

    #[test]
    fn compliant_instances_validate() {
        for v in [Variant::Basic, Variant::LoadBalance, Variant::MultiDim] {
            for seed in 0..50 {
                let inst = generate(&GeneratorConfig { seed, ..config(v) }).unwrap();
                let report = validate_instance(&inst, TheoremMode::Guarantee);
                assert!(report.feasible_for_guarantee, "{v} seed {seed}: {:?}", report.violations);
            }
        }
    }

    #[test]
    fn violating_mode_is_flagged() {
        for (v, rule) in [(Variant::Basic, Rule::BasicWeight), (Variant::LoadBalance, Rule::BatchWeight), (Variant::MultiDim, Rule::MultiDimWeight)] {
            let inst = generate(&GeneratorConfig { weight_mode: WeightMode::Violating, ..config(v) }).unwrap();
            let report = validate_instance(&inst, TheoremMode::Guarantee);
            assert!(report.violations.iter().any(|x| x.rule == rule && x.request == Some(0)), "{v}");
            assert!(validate_instance(&inst, TheoremMode::Assumptions).feasible_for_guarantee);
        }
    }

    #[test]
    fn lb_batches_respect_size() {
        let inst = generate(&GeneratorConfig { requests: 20, horizon: 40, ..config(Variant::LoadBalance) }).unwrap();
        assert!(inst.batches().iter().all(|(_, b)| b.len() <= 3));
        assert!(inst.resources.iter().all(|r| matches!(r.q, Some(1..=2))));
    }

    #[test]
    fn infeasible_configs() {
        assert!(matches!(generate(&GeneratorConfig { duration_ratio: 0.5, ..Default::default() }), Err(Error::Config(_))));
        assert!(matches!(generate(&GeneratorConfig { density_ratio: 0.9, ..Default::default() }), Err(Error::Config(_))));
        assert!(matches!(generate(&GeneratorConfig { horizon: 2, ..Default::default() }), Err(Error::Config(_))));
        let md = GeneratorConfig { xi: 1.5, ..config(Variant::MultiDim) };
        assert!(matches!(generate(&md), Err(Error::Config(_))));
    }

    #[test]
    fn ramp_hits_targets() {
        let cfg = GeneratorConfig { density_ratio: 4.0, duration_ratio: 3.0, duration_min: 1, requests: 6, horizon: 8, ..config(Variant::Basic) };
        let inst = adversarial_density_ramp(&cfg).unwrap();
        let stats = fluctuation_stats(&inst).unwrap();
        assert!((stats.density_ratio_max - 4.0).abs() < 1e-12);
        assert_eq!(stats.duration_ratio_max, 3.0);
        let t0 = cfg.horizon / 2;
        for r in &inst.requests {
            assert!(r.offers.values().all(|o| o.slots(0).contains(&t0)));
        }
        assert!(validate_instance(&inst, TheoremMode::Guarantee).feasible_for_guarantee);
    }

    #[test]
    fn ramp_with_one_request() {
        let inst = adversarial_density_ramp(&GeneratorConfig { requests: 1, ..config(Variant::Basic) }).unwrap();
        assert_eq!(inst.num_requests(), 1);
        assert_eq!(inst.num_resources(), 2);
        assert_eq!(fluctuation_stats(&inst).unwrap().density_ratio_max, 1.0);
    }
}
