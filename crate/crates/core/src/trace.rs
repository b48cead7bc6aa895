//! Run records shared by the three online algorithms, and the post-run audits
//! (capacity, batch caps, dual objective) that operate on them.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::instance::{Instance, Variant};
use crate::lb::BatchResult;
use crate::pricing::{PriceState, PricingTable};

/// Relative slack allowed when auditing summed weights against a capacity.
pub const CAPACITY_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Admission rule exactly as specified; capacity is audited after the run.
    #[default]
    Strict,
    /// Additionally refuses any admission that would overflow a slot.
    Guarded,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "strict" => Ok(Mode::Strict),
            "guarded" => Ok(Mode::Guarded),
            other => Err(format!("unknown mode '{other}' (expected strict or guarded)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Admitted(usize),
    Rejected,
    /// Guarded mode refused an admission to this resource because it would
    /// overflow. The request keeps its utility so the dual stays feasible.
    Blocked(usize),
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Admitted(_) => "admitted",
            Outcome::Rejected => "rejected",
            Outcome::Blocked(_) => "blocked",
        }
    }

    pub fn resource(&self) -> Option<usize> {
        match *self {
            Outcome::Admitted(k) => Some(k),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub step: usize,
    pub request: usize,
    pub outcome: Outcome,
    /// Best resource by residual reward, whether or not the request was admitted.
    pub k_star: Option<usize>,
    /// Reward minus posted cost on `k_star` at decision time.
    pub residual: f64,
    pub utility: f64,
    pub delta_primal: f64,
    pub delta_dual: f64,
    /// Gamma of the resource the request was admitted to.
    pub gamma: Option<f64>,
    /// Arrival slot of the batch this decision belongs to (load balancing).
    pub batch: Option<u32>,
}

impl Decision {
    pub fn ratio(&self) -> Option<f64> {
        (self.delta_primal > 0.0).then(|| self.delta_dual / self.delta_primal)
    }
}

/// Callbacks invoked while a run progresses.
pub trait Observer {
    fn after_step(&mut self, _decision: &Decision, _prices: &PriceState) {}
    fn after_batch(&mut self, _batch: &BatchResult, _prices: &PriceState) {}
}

impl Observer for () {}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub mode: Mode,
    /// Overrides the pricing parameters derived from the instance bounds.
    pub pricing: Option<PricingTable>,
}

impl RunOptions {
    pub fn guarded() -> Self {
        Self { mode: Mode::Guarded, pricing: None }
    }

    pub(crate) fn pricing_for(&self, instance: &Instance) -> Result<PricingTable> {
        match &self.pricing {
            Some(p) => Ok(p.clone()),
            None => PricingTable::for_instance(instance),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub variant: Variant,
    pub mode: Mode,
    pub pricing: PricingTable,
    pub prices: PriceState,
    pub decisions: Vec<Decision>,
    /// Per-batch solutions (load-balancing variant only).
    pub batches: Vec<BatchResult>,
    /// Resource each request id ended up on.
    pub assignment: Vec<Option<usize>>,
    /// Dual utility `u_n` per request id.
    pub utilities: Vec<f64>,
    /// Running primal objective.
    pub primal: f64,
    /// Running dual objective, accumulated step by step.
    pub dual: f64,
}

impl Trace {
    pub fn new(instance: &Instance, pricing: PricingTable, mode: Mode) -> Self {
        let n = instance.num_requests();
        Self {
            variant: instance.variant,
            mode,
            pricing,
            prices: PriceState::new(instance.horizon, &instance.resources),
            decisions: Vec::with_capacity(n),
            batches: Vec::new(),
            assignment: vec![None; n],
            utilities: vec![0.0; n],
            primal: 0.0,
            dual: 0.0,
        }
    }

    pub(crate) fn record(&mut self, decision: Decision) {
        self.primal += decision.delta_primal;
        self.dual += decision.delta_dual;
        self.decisions.push(decision);
    }

    /// Dual objective recomputed from the final variables:
    /// `sum_n u_n + sum_{k,m,t} C_km p_kmt + sum_{k,i} q_k h_ki`.
    pub fn dual_objective(&self, instance: &Instance) -> f64 {
        let batch_term: f64 = self
            .batches
            .iter()
            .map(|b| {
                b.h.iter()
                    .zip(&instance.resources)
                    .map(|(h, r)| h * f64::from(r.q.unwrap_or(1)))
                    .sum::<f64>()
            })
            .sum();
        self.utilities.iter().sum::<f64>()
            + self.prices.capacity_weighted_total(&instance.resources)
            + batch_term
    }

    /// Batch dual `h_k` in force for requests that arrived at `time`.
    pub fn batch_dual(&self, time: u32, k: usize) -> f64 {
        self.batches
            .iter()
            .find(|b| b.time == time)
            .map_or(0.0, |b| b.h[k])
    }

    pub fn max_step_ratio(&self) -> Option<f64> {
        self.decisions.iter().filter_map(Decision::ratio).reduce(f64::max)
    }

    /// Steps (load balancing: batch positions) whose dual increase exceeds
    /// `2 gamma / ln 2` times the primal increase, compared exactly. The
    /// basic and multi-dimensional variants use the gamma of the chosen
    /// resource, load balancing uses the largest gamma. Steps or batches
    /// containing a guarded-mode block are skipped.
    pub fn ratio_bound_violations(&self) -> Vec<usize> {
        let bound = |gamma: f64| 2.0 * gamma / std::f64::consts::LN_2;
        let exceeds = |dd: f64, dp: f64, gamma: f64| if dp > 0.0 { dd > bound(gamma) * dp } else { dd > 0.0 };
        if self.variant == Variant::LoadBalance {
            let gamma = self.pricing.gamma_max();
            self.batches
                .iter()
                .enumerate()
                .filter(|(_, b)| {
                    let blocked = self
                        .decisions
                        .iter()
                        .any(|d| d.batch == Some(b.time) && matches!(d.outcome, Outcome::Blocked(_)));
                    !blocked && exceeds(b.delta_dual, b.delta_primal, gamma)
                })
                .map(|(i, _)| i)
                .collect()
        } else {
            self.decisions
                .iter()
                .filter(|d| match d.outcome {
                    Outcome::Admitted(_) => exceeds(d.delta_dual, d.delta_primal, d.gamma.unwrap_or(0.0)),
                    Outcome::Rejected => d.delta_dual != 0.0,
                    Outcome::Blocked(_) => false,
                })
                .map(|d| d.step)
                .collect()
        }
    }

    pub fn admitted(&self) -> usize {
        self.assignment.iter().filter(|a| a.is_some()).count()
    }

    pub fn blocked(&self) -> usize {
        self.decisions
            .iter()
            .filter(|d| matches!(d.outcome, Outcome::Blocked(_)))
            .count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityViolation {
    pub resource: usize,
    pub dimension: usize,
    pub slot: u32,
    pub load: f64,
    pub capacity: f64,
}

/// Every (resource, dimension, slot) whose load under `assignment` exceeds
/// capacity. Loads are recomputed from scratch, independent of any price state.
pub fn capacity_violations(instance: &Instance, assignment: &[Option<usize>]) -> Vec<CapacityViolation> {
    let horizon = instance.horizon as usize;
    let mut load: Vec<Vec<Vec<f64>>> = instance
        .resources
        .iter()
        .map(|r| vec![vec![0.0; horizon]; r.dims()])
        .collect();
    for req in &instance.requests {
        let Some(k) = assignment[req.id] else { continue };
        let offer = &req.offers[&k];
        for m in 0..offer.dims() {
            for t in offer.slots(m) {
                load[k][m][t as usize] += offer.w[m];
            }
        }
    }
    let mut out = Vec::new();
    for (k, dims) in load.iter().enumerate() {
        for (m, slots) in dims.iter().enumerate() {
            let cap = instance.resources[k].capacities[m];
            for (t, &l) in slots.iter().enumerate() {
                if l > cap * (1.0 + CAPACITY_TOLERANCE) {
                    out.push(CapacityViolation { resource: k, dimension: m, slot: t as u32, load: l, capacity: cap });
                }
            }
        }
    }
    out
}

/// `(batch time, resource, admitted count)` for every batch that admitted
/// more than `q_k` requests to resource `k`.
pub fn batch_cap_violations(instance: &Instance, assignment: &[Option<usize>]) -> Vec<(u32, usize, u32)> {
    let mut counts: HashMap<(u32, usize), u32> = HashMap::new();
    for req in &instance.requests {
        if let Some(k) = assignment[req.id] {
            *counts.entry((req.arrival, k)).or_default() += 1;
        }
    }
    let mut out: Vec<_> = counts
        .into_iter()
        .filter(|&((_, k), c)| c > instance.resources[k].q.unwrap_or(u32::MAX))
        .map(|((t, k), c)| (t, k, c))
        .collect();
    out.sort_unstable();
    out
}
