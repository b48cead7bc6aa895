//! Instance model: resources, requests and their per-resource offers, plus the
//! fluctuation statistics and assumption checks that feed the pricing engine.
//!
//! Time is discrete. Slots are `0..horizon` and an offer that starts at `s`
//! for `d` slots occupies the inclusive set `{s, ..., s + d - 1}`. Single
//! dimension variants store every offer as a one-element vector so that all
//! three algorithms share the same data layout.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pricing::{gamma_basic, gamma_md};

/// Relative slack used when comparing realized densities against declared
/// bounds. Generated rewards are back-solved as `v = density * w * d`, so the
/// recomputed density can differ from the drawn one by an ulp or two.
pub const BOUND_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "basic")]
    Basic,
    #[serde(rename = "lb")]
    LoadBalance,
    #[serde(rename = "md")]
    MultiDim,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Basic => "basic",
            Variant::LoadBalance => "lb",
            Variant::MultiDim => "md",
        }
    }

    pub fn is_single_dim(self) -> bool {
        !matches!(self, Variant::MultiDim)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "basic" => Ok(Variant::Basic),
            "lb" => Ok(Variant::LoadBalance),
            "md" => Ok(Variant::MultiDim),
            other => Err(format!("unknown variant '{other}' (expected basic, lb or md)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resource {
    pub id: usize,
    /// One capacity per dimension.
    pub capacities: Vec<f64>,
    /// Per-batch admission cap, load-balancing variant only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<u32>,
}

impl Resource {
    pub fn single(id: usize, capacity: f64) -> Self {
        Self { id, capacities: vec![capacity], q: None }
    }

    pub fn dims(&self) -> usize {
        self.capacities.len()
    }
}

/// What request `n` asks of resource `k`: reward `v`, and per dimension a
/// weight, a start slot and a duration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Offer {
    pub v: f64,
    pub w: Vec<f64>,
    pub s: Vec<u32>,
    pub d: Vec<u32>,
}

impl Offer {
    pub fn single(v: f64, w: f64, s: u32, d: u32) -> Self {
        Self { v, w: vec![w], s: vec![s], d: vec![d] }
    }

    pub fn dims(&self) -> usize {
        self.w.len()
    }

    /// Occupied slots in dimension `m`.
    pub fn slots(&self, m: usize) -> Range<u32> {
        self.s[m]..self.s[m] + self.d[m]
    }

    /// `sum_m w_m * d_m`, the denominator of the value density.
    pub fn weight_time(&self) -> f64 {
        self.w.iter().zip(&self.d).map(|(w, d)| w * f64::from(*d)).sum()
    }

    fn is_degenerate(&self) -> bool {
        self.v > 0.0 && self.weight_time() <= 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: usize,
    pub arrival: u32,
    /// Offers keyed by resource id. A missing key means the request cannot use
    /// that resource.
    pub offers: BTreeMap<usize, Offer>,
}

/// Setup information the online algorithm is allowed to know in advance.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DeclaredBounds {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<[f64; 2]>,
    /// Upper bound on the total demand fluctuation (multi-dimensional only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
}

impl DeclaredBounds {
    fn density(&self, variant: Variant) -> Option<[f64; 2]> {
        match variant {
            Variant::MultiDim => self.rho,
            _ => self.theta,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub horizon: u32,
    pub variant: Variant,
    pub resources: Vec<Resource>,
    pub requests: Vec<Request>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub declared_bounds: BTreeMap<usize, DeclaredBounds>,
}

impl Instance {
    /// Builds an instance, sorting requests by `(arrival, id)` and checking
    /// every structural invariant.
    pub fn new(
        horizon: u32,
        variant: Variant,
        resources: Vec<Resource>,
        requests: Vec<Request>,
    ) -> Result<Self> {
        let mut instance = Instance {
            horizon,
            variant,
            resources,
            requests,
            declared_bounds: BTreeMap::new(),
        };
        instance.normalize()?;
        Ok(instance)
    }

    pub fn with_declared_bounds(mut self, bounds: BTreeMap<usize, DeclaredBounds>) -> Result<Self> {
        self.declared_bounds = bounds;
        self.normalize()?;
        Ok(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut instance: Instance = serde_json::from_str(text)?;
        instance.normalize()?;
        Ok(instance)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Same data under another variant tag. Fails if the data does not fit
    /// the target (e.g. missing `q` for the load-balancing variant).
    pub fn with_variant(&self, variant: Variant) -> Result<Self> {
        let mut out = self.clone();
        out.variant = variant;
        out.normalize()?;
        Ok(out)
    }

    pub fn num_requests(&self) -> usize {
        self.requests.len()
    }

    pub fn num_resources(&self) -> usize {
        self.resources.len()
    }

    pub fn request_by_id(&self, id: usize) -> Option<&Request> {
        self.requests.iter().find(|r| r.id == id)
    }

    /// Requests grouped by arrival slot, in arrival order.
    pub fn batches(&self) -> Vec<(u32, &[Request])> {
        let mut out = Vec::new();
        let mut start = 0;
        while start < self.requests.len() {
            let time = self.requests[start].arrival;
            let mut end = start;
            while end < self.requests.len() && self.requests[end].arrival == time {
                end += 1;
            }
            out.push((time, &self.requests[start..end]));
            start = end;
        }
        out
    }

    fn normalize(&mut self) -> Result<()> {
        self.requests.sort_by_key(|r| (r.arrival, r.id));
        self.check_structure()
    }

    fn check_structure(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Structure(msg));
        if self.horizon == 0 {
            return bad("horizon must be positive".into());
        }
        for (idx, res) in self.resources.iter().enumerate() {
            if res.id != idx {
                return bad(format!("resource at position {idx} has id {}", res.id));
            }
            if res.capacities.is_empty() {
                return bad(format!("resource {idx} has no capacities"));
            }
            if self.variant.is_single_dim() && res.capacities.len() != 1 {
                return bad(format!(
                    "resource {idx} has {} dimensions in a single-dimension instance",
                    res.capacities.len()
                ));
            }
            if res.capacities.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
                return bad(format!("resource {idx} has a non-positive capacity"));
            }
            match (self.variant, res.q) {
                (Variant::LoadBalance, None) => {
                    return bad(format!("resource {idx} lacks a batch cap q"));
                }
                (_, Some(0)) => return bad(format!("resource {idx} has q = 0")),
                _ => {}
            }
        }

        let mut seen = vec![false; self.requests.len()];
        for req in &self.requests {
            if req.id >= seen.len() || seen[req.id] {
                return bad(format!(
                    "request ids must be a permutation of 0..{}; offending id {}",
                    seen.len(),
                    req.id
                ));
            }
            seen[req.id] = true;
            if req.arrival >= self.horizon {
                return bad(format!("request {} arrives outside the horizon", req.id));
            }
            if req.offers.is_empty() {
                return bad(format!("request {} has no offers", req.id));
            }
            for (&k, offer) in &req.offers {
                let Some(res) = self.resources.get(k) else {
                    return bad(format!("request {} offers on unknown resource {k}", req.id));
                };
                let dims = res.dims();
                if offer.w.len() != dims || offer.s.len() != dims || offer.d.len() != dims {
                    return bad(format!(
                        "request {} offer on resource {k} must have {dims} entries in w, s and d",
                        req.id
                    ));
                }
                if !(offer.v.is_finite() && offer.v >= 0.0) {
                    return bad(format!("request {} has an invalid reward on resource {k}", req.id));
                }
                for m in 0..dims {
                    let (w, s, d) = (offer.w[m], offer.s[m], offer.d[m]);
                    if !(w.is_finite() && w >= 0.0) {
                        return bad(format!("request {} has an invalid weight on resource {k}", req.id));
                    }
                    if d == 0 {
                        return bad(format!("request {} has a zero duration on resource {k}", req.id));
                    }
                    if s < req.arrival {
                        return bad(format!("request {} starts before it arrives on resource {k}", req.id));
                    }
                    if u64::from(s) + u64::from(d) > u64::from(self.horizon) {
                        return bad(format!(
                            "request {} interval on resource {k} leaves the horizon",
                            req.id
                        ));
                    }
                }
            }
        }

        for (&k, b) in &self.declared_bounds {
            if k >= self.resources.len() {
                return bad(format!("declared bounds for unknown resource {k}"));
            }
            for pair in [b.theta, b.d, b.rho].into_iter().flatten() {
                if !(pair[0] > 0.0 && pair[0] <= pair[1] && pair[1].is_finite()) {
                    return bad(format!("declared bounds for resource {k} must satisfy 0 < min <= max"));
                }
            }
            if let Some(xi) = b.xi {
                if !(xi >= 1.0 && xi.is_finite()) {
                    return bad(format!("declared xi for resource {k} must be >= 1"));
                }
            }
        }
        Ok(())
    }
}

/// Value density of an offer: `v / (w d)` for single-dimension variants and
/// `v / sum_m w_m d_m` for the multi-dimensional one.
pub fn value_density(offer: &Offer, variant: Variant) -> Result<f64> {
    let denom = if variant.is_single_dim() {
        offer.w[0] * f64::from(offer.d[0])
    } else {
        offer.weight_time()
    };
    if denom > 0.0 {
        Ok(offer.v / denom)
    } else if offer.v > 0.0 {
        Err(Error::Degenerate)
    } else {
        Ok(0.0)
    }
}

/// Sum of the per-dimension weights over the smallest positive one.
pub fn total_demand_fluctuation(offer: &Offer) -> Result<f64> {
    let min = offer
        .w
        .iter()
        .copied()
        .filter(|w| *w > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(Error::NoPositiveWeight);
    }
    Ok(offer.w.iter().sum::<f64>() / min)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceStats {
    pub density_min: f64,
    pub density_max: f64,
    pub d_min: f64,
    pub d_max: f64,
    /// Largest total demand fluctuation; 1 for single-dimension offers.
    pub xi_max: f64,
}

impl ResourceStats {
    pub fn density_ratio(&self) -> f64 {
        self.density_max / self.density_min
    }

    pub fn duration_ratio(&self) -> f64 {
        self.d_max / self.d_min
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluctuationStats {
    /// `None` for resources that receive no offer with positive density.
    pub resources: Vec<Option<ResourceStats>>,
    pub excluded: Vec<usize>,
    pub density_ratio_max: f64,
    pub duration_ratio_max: f64,
    pub xi_max: f64,
}

impl FluctuationStats {
    fn from_resources(resources: Vec<Option<ResourceStats>>) -> Self {
        let excluded = resources
            .iter()
            .enumerate()
            .filter_map(|(k, s)| s.is_none().then_some(k))
            .collect();
        let fold = |f: fn(&ResourceStats) -> f64| {
            resources.iter().flatten().map(f).fold(1.0, f64::max)
        };
        Self {
            density_ratio_max: fold(ResourceStats::density_ratio),
            duration_ratio_max: fold(ResourceStats::duration_ratio),
            xi_max: fold(|s| s.xi_max),
            excluded,
            resources,
        }
    }
}

#[derive(Default)]
struct Accumulator {
    density_min: Option<f64>,
    density_max: f64,
    d_min: Option<u32>,
    d_max: u32,
    xi_max: f64,
}

impl Accumulator {
    fn finish(self) -> Option<ResourceStats> {
        let density_min = self.density_min?;
        Some(ResourceStats {
            density_min,
            density_max: self.density_max,
            d_min: f64::from(self.d_min?),
            d_max: f64::from(self.d_max),
            xi_max: self.xi_max.max(1.0),
        })
    }
}

fn realized(instance: &Instance, skip_degenerate: bool) -> Result<Vec<Option<ResourceStats>>> {
    let mut acc: Vec<Accumulator> = (0..instance.num_resources()).map(|_| Accumulator::default()).collect();
    for req in &instance.requests {
        for (&k, offer) in &req.offers {
            let density = match value_density(offer, instance.variant) {
                Ok(x) => x,
                Err(_) if skip_degenerate => continue,
                Err(_) => return Err(Error::DegenerateOffer { request: req.id, resource: k }),
            };
            let a = &mut acc[k];
            if density > 0.0 {
                a.density_min = Some(a.density_min.map_or(density, |m| m.min(density)));
            }
            a.density_max = a.density_max.max(density);
            for &d in &offer.d {
                a.d_min = Some(a.d_min.map_or(d, |m| m.min(d)));
                a.d_max = a.d_max.max(d);
            }
            if let Ok(xi) = total_demand_fluctuation(offer) {
                a.xi_max = a.xi_max.max(xi);
            }
        }
    }
    Ok(acc.into_iter().map(Accumulator::finish).collect())
}

/// Realized fluctuation statistics. Minima are taken over strictly positive
/// values; a resource without any positive-density offer is excluded.
pub fn fluctuation_stats(instance: &Instance) -> Result<FluctuationStats> {
    Ok(FluctuationStats::from_resources(realized(instance, false)?))
}

/// Statistics the online algorithm runs with: declared bounds where the
/// instance provides them, realized values otherwise.
pub fn effective_stats(instance: &Instance) -> Result<FluctuationStats> {
    let realized = realized(instance, false)?;
    Ok(FluctuationStats::from_resources(merge_declared(instance, realized)))
}

fn merge_declared(instance: &Instance, realized: Vec<Option<ResourceStats>>) -> Vec<Option<ResourceStats>> {
    realized
        .into_iter()
        .enumerate()
        .map(|(k, real)| {
            let Some(decl) = instance.declared_bounds.get(&k) else {
                return real;
            };
            let density = decl
                .density(instance.variant)
                .or_else(|| real.as_ref().map(|r| [r.density_min, r.density_max]))?;
            let d = decl.d.or_else(|| real.as_ref().map(|r| [r.d_min, r.d_max]))?;
            let xi = decl.xi.or_else(|| real.as_ref().map(|r| r.xi_max)).unwrap_or(1.0);
            Some(ResourceStats {
                density_min: density[0],
                density_max: density[1],
                d_min: d[0],
                d_max: d[1],
                xi_max: xi,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TheoremMode {
    /// Check the standing assumptions only (weights at most the capacity).
    Assumptions,
    /// Check the weight precondition of the variant's competitive-ratio theorem.
    Guarantee,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    Degenerate,
    DensityBounds,
    DurationBounds,
    Capacity,
    BasicWeight,
    BatchWeight,
    MultiDimWeight,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::Degenerate => "degenerate offer",
            Rule::DensityBounds => "density bounds",
            Rule::DurationBounds => "duration bounds",
            Rule::Capacity => "weight above capacity",
            Rule::BasicWeight => "weight precondition (basic)",
            Rule::BatchWeight => "weight precondition (lb)",
            Rule::MultiDimWeight => "weight precondition (md)",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    pub request: Option<usize>,
    pub resource: Option<usize>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.rule)?;
        if let Some(n) = self.request {
            write!(f, " request {n}")?;
        }
        if let Some(k) = self.resource {
            write!(f, " resource {k}")?;
        }
        write!(f, ": {}", self.detail)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub mode: TheoremMode,
    pub violations: Vec<Violation>,
    pub notes: Vec<String>,
    pub feasible_for_guarantee: bool,
}

/// Largest weight each resource dimension may carry for the variant's
/// guarantee to apply, given `gamma` for that resource.
pub fn guarantee_weight_cap(variant: Variant, capacity: f64, gamma: f64, q: Option<u32>) -> f64 {
    let base = capacity * std::f64::consts::LN_2 / gamma;
    match variant {
        Variant::LoadBalance => base / f64::from(q.unwrap_or(1)),
        _ => base,
    }
}

/// Checks the standing assumptions and, in guarantee mode, the theorem
/// precondition. Problems are returned as data; this never fails.
pub fn validate_instance(instance: &Instance, mode: TheoremMode) -> ValidationReport {
    let mut violations = Vec::new();
    let mut notes = Vec::new();
    let variant = instance.variant;

    for req in &instance.requests {
        for (&k, offer) in &req.offers {
            if offer.is_degenerate() {
                violations.push(Violation {
                    rule: Rule::Degenerate,
                    request: Some(req.id),
                    resource: Some(k),
                    detail: "positive reward with zero weight-time".into(),
                });
            }
        }
    }

    let realized = realized(instance, true).unwrap_or_default();
    let effective = merge_declared(instance, realized);

    for (k, res) in instance.resources.iter().enumerate() {
        let declared = instance.declared_bounds.get(&k);
        let density_decl = declared.and_then(|b| b.density(variant));
        let d_decl = declared.and_then(|b| b.d);
        let xi_decl = declared.and_then(|b| b.xi);
        if density_decl.is_none() || d_decl.is_none() {
            notes.push(format!(
                "resource {k}: bounds not fully declared; using bounds computed from the realized offers"
            ));
        }

        let gamma = effective[k].as_ref().and_then(|s| match variant {
            Variant::MultiDim => gamma_md(s.density_ratio(), s.duration_ratio(), s.xi_max).ok(),
            _ => gamma_basic(s.density_ratio(), s.duration_ratio()).ok(),
        });
        if effective[k].is_none() {
            notes.push(format!("resource {k}: no offer with positive density; excluded from statistics"));
        }

        for req in &instance.requests {
            let Some(offer) = req.offers.get(&k) else { continue };
            if offer.is_degenerate() {
                continue;
            }
            if let (Some([lo, hi]), Ok(theta)) = (density_decl, value_density(offer, variant)) {
                if theta > 0.0 && (theta < lo * (1.0 - BOUND_TOLERANCE) || theta > hi * (1.0 + BOUND_TOLERANCE)) {
                    violations.push(Violation {
                        rule: Rule::DensityBounds,
                        request: Some(req.id),
                        resource: Some(k),
                        detail: format!("density {theta} outside declared [{lo}, {hi}]"),
                    });
                }
            }
            if let Some([lo, hi]) = d_decl {
                for &d in &offer.d {
                    let d = f64::from(d);
                    if d < lo || d > hi {
                        violations.push(Violation {
                            rule: Rule::DurationBounds,
                            request: Some(req.id),
                            resource: Some(k),
                            detail: format!("duration {d} outside declared [{lo}, {hi}]"),
                        });
                    }
                }
            }
            if let (Some(bound), Ok(xi)) = (xi_decl, total_demand_fluctuation(offer)) {
                if xi > bound * (1.0 + BOUND_TOLERANCE) {
                    violations.push(Violation {
                        rule: Rule::DensityBounds,
                        request: Some(req.id),
                        resource: Some(k),
                        detail: format!("demand fluctuation {xi} above declared {bound}"),
                    });
                }
            }
            for (m, (&w, &cap)) in offer.w.iter().zip(&res.capacities).enumerate() {
                let (limit, rule) = match (mode, gamma) {
                    (TheoremMode::Assumptions, _) => (cap, Rule::Capacity),
                    (TheoremMode::Guarantee, Some(g)) => (
                        guarantee_weight_cap(variant, cap, g, res.q),
                        match variant {
                            Variant::Basic => Rule::BasicWeight,
                            Variant::LoadBalance => Rule::BatchWeight,
                            Variant::MultiDim => Rule::MultiDimWeight,
                        },
                    ),
                    // No positive-density offer: nothing on k can ever be admitted.
                    (TheoremMode::Guarantee, None) => (cap, Rule::Capacity),
                };
                if w > limit {
                    violations.push(Violation {
                        rule,
                        request: Some(req.id),
                        resource: Some(k),
                        detail: format!("weight {w} in dimension {m} exceeds {limit}"),
                    });
                }
            }
        }
    }

    ValidationReport {
        mode,
        feasible_for_guarantee: violations.is_empty(),
        violations,
        notes,
    }
}
