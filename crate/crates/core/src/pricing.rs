//! Dual prices per (resource, dimension, slot) and the exponential update that
//! keeps them tied to utilization.
//!
//! Every admitted weight `w` multiplies the slot price by `mu = e^(w gamma / C)`
//! and adds `beta = density_min (mu - 1)`. Starting from zero this keeps
//! `p = density_min (e^(gamma z / C) - 1)` where `z` is the slot utilization,
//! which is what [`PriceState::closed_form_gap`] audits.

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{effective_stats, FluctuationStats, Instance, Offer, Resource, Variant};

/// `2 ln(2 + 4 theta_bar d_bar)`.
pub fn gamma_basic(density_ratio: f64, duration_ratio: f64) -> Result<f64> {
    check_ratio("density ratio", density_ratio)?;
    check_ratio("duration ratio", duration_ratio)?;
    Ok(2.0 * (2.0 + 4.0 * density_ratio * duration_ratio).ln())
}

/// `2 ln(4 rho_bar d_bar xi_max + 2)`.
pub fn gamma_md(density_ratio: f64, duration_ratio: f64, xi_max: f64) -> Result<f64> {
    check_ratio("density ratio", density_ratio)?;
    check_ratio("duration ratio", duration_ratio)?;
    check_ratio("demand fluctuation", xi_max)?;
    Ok(2.0 * (4.0 * density_ratio * duration_ratio * xi_max + 2.0).ln())
}

fn check_ratio(name: &str, x: f64) -> Result<()> {
    if x >= 1.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be >= 1, got {x}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateFactors {
    pub mu: f64,
    pub beta: f64,
}

pub fn update_factors(w: f64, capacity: f64, gamma: f64, density_min: f64) -> UpdateFactors {
    let x = w * gamma / capacity;
    UpdateFactors { mu: x.exp(), beta: density_min * x.exp_m1() }
}

/// `density_min (e^(gamma z / C) - 1)`.
pub fn closed_form_price(density_min: f64, gamma: f64, z: f64, capacity: f64) -> f64 {
    density_min * (gamma * z / capacity).exp_m1()
}

/// Per-resource pricing parameters, fixed before the first request arrives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourcePricing {
    pub gamma: f64,
    pub density_min: f64,
}

impl ResourcePricing {
    pub fn factors(&self, w: f64, capacity: f64) -> UpdateFactors {
        update_factors(w, capacity, self.gamma, self.density_min)
    }
}

/// Pricing parameters for every resource. `None` marks a resource with no
/// positive-density offer; nothing can ever be admitted there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PricingTable(pub Vec<Option<ResourcePricing>>);

impl PricingTable {
    /// Parameters from the declared (or, absent those, realized) bounds.
    pub fn for_instance(instance: &Instance) -> Result<Self> {
        Self::from_stats(&effective_stats(instance)?, instance.variant)
    }

    pub fn from_stats(stats: &FluctuationStats, variant: Variant) -> Result<Self> {
        stats
            .resources
            .iter()
            .map(|s| {
                s.as_ref()
                    .map(|s| {
                        let gamma = match variant {
                            Variant::MultiDim => gamma_md(s.density_ratio(), s.duration_ratio(), s.xi_max)?,
                            _ => gamma_basic(s.density_ratio(), s.duration_ratio())?,
                        };
                        Ok(ResourcePricing { gamma, density_min: s.density_min })
                    })
                    .transpose()
            })
            .collect::<Result<Vec<_>>>()
            .map(PricingTable)
    }

    pub fn get(&self, k: usize) -> Option<&ResourcePricing> {
        self.0.get(k).and_then(Option::as_ref)
    }

    /// Largest gamma over priced resources; `2 ln 6` when none is priced.
    pub fn gamma_max(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .map(|p| p.gamma)
            .fold(2.0 * 6f64.ln(), f64::max)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub price: f64,
    pub utilization: f64,
}

/// Sparse price and utilization storage; untouched slots are zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceState {
    horizon: u32,
    cells: Vec<Vec<BTreeMap<u32, Cell>>>,
}

impl PriceState {
    pub fn new(horizon: u32, resources: &[Resource]) -> Self {
        Self {
            horizon,
            cells: resources.iter().map(|r| vec![BTreeMap::new(); r.dims()]).collect(),
        }
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn cell(&self, k: usize, m: usize, t: u32) -> Cell {
        self.cells[k][m].get(&t).copied().unwrap_or_default()
    }

    pub fn price(&self, k: usize, m: usize, t: u32) -> f64 {
        self.cell(k, m, t).price
    }

    pub fn utilization(&self, k: usize, m: usize, t: u32) -> f64 {
        self.cell(k, m, t).utilization
    }

    /// `sum_{t in slots} p[k][m][t]`.
    pub fn price_sum(&self, k: usize, m: usize, slots: Range<u32>) -> f64 {
        self.cells[k][m].range(slots).map(|(_, c)| c.price).sum()
    }

    /// Largest utilization over `slots` in dimension `m` of resource `k`.
    pub fn peak_utilization(&self, k: usize, m: usize, slots: Range<u32>) -> f64 {
        self.cells[k][m].range(slots).map(|(_, c)| c.utilization).fold(0.0, f64::max)
    }

    /// Applies `p <- mu p + beta` and `z <- z + w` on every slot and returns
    /// the total price increase. Zero weights leave the state untouched.
    pub fn apply_update(
        &mut self,
        k: usize,
        m: usize,
        slots: Range<u32>,
        factors: UpdateFactors,
        w: f64,
    ) -> Result<f64> {
        if slots.end > self.horizon {
            return Err(Error::OutOfHorizon { slot: slots.end - 1, horizon: self.horizon });
        }
        if w == 0.0 {
            return Ok(0.0);
        }
        let mut increase = 0.0;
        let dim = &mut self.cells[k][m];
        for t in slots {
            let cell = dim.entry(t).or_default();
            let next = factors.mu * cell.price + factors.beta;
            increase += next - cell.price;
            cell.price = next;
            cell.utilization += w;
        }
        Ok(increase)
    }

    /// Every stored cell as `(k, m, t, cell)`.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, u32, &Cell)> + '_ {
        self.cells.iter().enumerate().flat_map(|(k, dims)| {
            dims.iter()
                .enumerate()
                .flat_map(move |(m, map)| map.iter().map(move |(t, c)| (k, m, *t, c)))
        })
    }

    /// `sum_{k,m,t} C_km p_kmt`, the price part of the dual objective.
    pub fn capacity_weighted_total(&self, resources: &[Resource]) -> f64 {
        self.cells()
            .map(|(k, m, _, c)| resources[k].capacities[m] * c.price)
            .sum()
    }

    /// Largest relative deviation of any stored price from the closed form
    /// implied by its utilization, measured as `|p - cf| / max(|cf|, abs / rel)`
    /// so that [`ClosedFormGap::holds`] means "within `rel` relative or `abs`
    /// absolute".
    pub fn closed_form_gap(&self, pricing: &PricingTable, resources: &[Resource]) -> ClosedFormGap {
        let mut gap = ClosedFormGap::default();
        for (k, m, t, cell) in self.cells() {
            let expected = match pricing.get(k) {
                Some(p) => closed_form_price(p.density_min, p.gamma, cell.utilization, resources[k].capacities[m]),
                None => 0.0,
            };
            let err = (cell.price - expected).abs();
            let scale = expected.abs().max(CLOSED_FORM_ABS / CLOSED_FORM_REL);
            if err / scale > gap.max_relative {
                gap = ClosedFormGap { max_relative: err / scale, worst: Some((k, m, t)) };
            }
        }
        gap
    }
}

pub const CLOSED_FORM_REL: f64 = 1e-9;
pub const CLOSED_FORM_ABS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ClosedFormGap {
    pub max_relative: f64,
    pub worst: Option<(usize, usize, u32)>,
}

impl ClosedFormGap {
    /// Within `1e-9` relative with a `1e-12` absolute floor.
    pub fn holds(&self) -> bool {
        self.max_relative <= CLOSED_FORM_REL
    }
}

/// Price part of the admission test: `sum_m w_m sum_{t in T_m} p[k][m][t]`.
pub fn posted_cost(state: &PriceState, offer: &Offer, k: usize) -> f64 {
    (0..offer.dims())
        .filter(|&m| offer.w[m] > 0.0)
        .map(|m| offer.w[m] * state.price_sum(k, m, offer.slots(m)))
        .sum()
}
