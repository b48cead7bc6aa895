//! Shared random-instance sampling for the integration and acceptance tests.
#![allow(dead_code)]

use omkd::generators::{generate, GeneratorConfig};
use omkd::{Instance, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const VARIANTS: [Variant; 3] = [Variant::Basic, Variant::LoadBalance, Variant::MultiDim];

/// Generator config with shape parameters drawn from `seed`, so a seed range
/// covers a spread of sizes, fluctuations and contention levels.
pub fn sampled_config(variant: Variant, seed: u64, max_requests: usize, max_resources: usize) -> GeneratorConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0000);
    let duration_min = rng.gen_range(1..=2);
    let duration_ratio = [1.0, 1.5, 2.0, 3.0, 4.0][rng.gen_range(0..5)];
    let d_max = (f64::from(duration_min) * duration_ratio + 1e-9).floor() as u32;
    let requests = rng.gen_range(1..=max_requests);
    let horizon = d_max
        + match variant {
            // Room for every batch to get its own arrival slot.
            Variant::LoadBalance => requests as u32 + rng.gen_range(0..4),
            _ => rng.gen_range(1..=8),
        };
    let dims_max = rng.gen_range(1..=3);
    GeneratorConfig {
        seed,
        variant,
        resources: rng.gen_range(1..=max_resources),
        requests,
        horizon,
        capacity: [rng.gen_range(0.5..2.0), rng.gen_range(2.0..6.0)],
        density_min: (rng.gen_range(-2.0f64..2.0)).exp(),
        density_ratio: (rng.gen_range(0.0f64..3.0)).exp(),
        duration_min,
        duration_ratio,
        xi: dims_max as f64 + rng.gen_range(0.0..3.0),
        weight_spread: rng.gen_range(1.0..8.0),
        batch_size: rng.gen_range(1..=4),
        q: [1, rng.gen_range(1..=3)],
        dims: [1, dims_max],
        offer_probability: rng.gen_range(0.3..=1.0),
        max_delay: rng.gen_range(0..=3),
        ..Default::default()
    }
}

pub fn sampled(variant: Variant, seed: u64, max_requests: usize, max_resources: usize) -> Instance {
    generate(&sampled_config(variant, seed, max_requests, max_resources)).expect("sampled config is feasible")
}
