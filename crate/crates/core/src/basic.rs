//! Online primal-dual admission for the basic variant: each arriving request
//! goes to the resource with the largest residual reward if that residual is
//! positive, and the occupied slot prices are bumped exponentially.

use crate::error::{Error, Result};
use crate::instance::{Instance, Request, Variant};
use crate::pricing::PriceState;
use crate::trace::{Decision, Mode, Observer, Outcome, RunOptions, Trace};

/// Resource maximizing `v - w * sum_t p_t` over the request's offers, with
/// the lowest id winning ties, together with that maximum.
pub fn select_resource(request: &Request, prices: &PriceState) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (&k, offer) in &request.offers {
        let residual = offer.v - offer.w[0] * prices.price_sum(k, 0, offer.slots(0));
        if best.map_or(true, |(_, b)| residual > b) {
            best = Some((k, residual));
        }
    }
    best
}

/// Decides one request and updates primal, dual and prices in `trace`.
pub fn step(trace: &mut Trace, instance: &Instance, request: &Request, mode: Mode) -> Result<Decision> {
    let mut decision = Decision {
        step: trace.decisions.len(),
        request: request.id,
        outcome: Outcome::Rejected,
        k_star: None,
        residual: 0.0,
        utility: 0.0,
        delta_primal: 0.0,
        delta_dual: 0.0,
        gamma: None,
        batch: None,
    };
    let Some((k, residual)) = select_resource(request, &trace.prices) else {
        trace.record(decision.clone());
        return Ok(decision);
    };
    decision.k_star = Some(k);
    decision.residual = residual;

    // Strict inequality: a zero residual rejects.
    if residual > 0.0 {
        let offer = &request.offers[&k];
        let capacity = instance.resources[k].capacities[0];
        let pricing = *trace
            .pricing
            .get(k)
            .ok_or(Error::DegenerateOffer { request: request.id, resource: k })?;
        let slots = offer.slots(0);
        decision.utility = residual;
        trace.utilities[request.id] = residual;

        if mode == Mode::Guarded && trace.prices.peak_utilization(k, 0, slots.clone()) + offer.w[0] > capacity {
            decision.outcome = Outcome::Blocked(k);
            decision.delta_dual = residual;
        } else {
            let factors = pricing.factors(offer.w[0], capacity);
            let increase = trace.prices.apply_update(k, 0, slots, factors, offer.w[0])?;
            trace.assignment[request.id] = Some(k);
            decision.outcome = Outcome::Admitted(k);
            decision.gamma = Some(pricing.gamma);
            decision.delta_primal = offer.v;
            decision.delta_dual = residual + capacity * increase;
        }
    }
    trace.record(decision.clone());
    Ok(decision)
}

pub fn run(instance: &Instance) -> Result<Trace> {
    run_with(instance, &RunOptions::default())
}

pub fn run_with(instance: &Instance, options: &RunOptions) -> Result<Trace> {
    run_observed(instance, options, &mut ())
}

pub fn run_observed(instance: &Instance, options: &RunOptions, observer: &mut dyn Observer) -> Result<Trace> {
    if instance.variant != Variant::Basic {
        return Err(Error::VariantMismatch { expected: Variant::Basic, found: instance.variant });
    }
    let mut trace = Trace::new(instance, options.pricing_for(instance)?, options.mode);
    for request in &instance.requests {
        let decision = step(&mut trace, instance, request, options.mode)?;
        observer.after_step(&decision, &trace.prices);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::instance::{DeclaredBounds, Offer, Resource};
    use crate::pricing::{gamma_basic, posted_cost};

    fn request(id: usize, offers: Vec<(usize, Offer)>) -> Request {
        Request { id, arrival: 0, offers: offers.into_iter().collect() }
    }

    fn two_resources() -> Vec<Resource> {
        vec![Resource::single(0, 10.0), Resource::single(1, 10.0)]
    }

    #[test]
    fn selection_at_zero_prices() {
        let prices = PriceState::new(4, &two_resources());
        let r = request(0, vec![(0, Offer::single(5.0, 1.0, 0, 1)), (1, Offer::single(3.0, 1.0, 0, 1))]);
        assert_eq!(select_resource(&r, &prices), Some((0, 5.0)));
        let r = request(0, vec![(0, Offer::single(5.0, 1.0, 0, 1)), (1, Offer::single(5.0, 1.0, 0, 1))]);
        assert_eq!(select_resource(&r, &prices), Some((0, 5.0)));
    }

    #[test]
    fn selection_with_posted_costs() {
        // posted costs 4.5 on k0 and 2 on k1
        let res = two_resources();
        let mut prices = PriceState::new(4, &res);
        let f0 = crate::pricing::UpdateFactors { mu: 1.0, beta: 4.5 };
        let f1 = crate::pricing::UpdateFactors { mu: 1.0, beta: 2.0 };
        prices.apply_update(0, 0, 0..1, f0, 1.0).unwrap();
        prices.apply_update(1, 0, 0..1, f1, 1.0).unwrap();
        let r = request(0, vec![(0, Offer::single(5.0, 1.0, 0, 1)), (1, Offer::single(3.0, 1.0, 0, 1))]);
        assert_eq!(posted_cost(&prices, &r.offers[&0], 0), 4.5);
        let (k, residual) = select_resource(&r, &prices).unwrap();
        assert_eq!(k, 1);
        assert_eq!(residual, 1.0);
    }

    fn instance(requests: Vec<Request>, capacity: f64, horizon: u32) -> Instance {
        Instance::new(horizon, Variant::Basic, vec![Resource::single(0, capacity)], requests).unwrap()
    }

    #[test]
    fn empty_run() {
        let t = run(&instance(vec![], 1.0, 2)).unwrap();
        assert_eq!((t.primal, t.dual), (0.0, 0.0));
    }

    #[test]
    fn single_request_one_step() {
        let inst = instance(vec![request(0, vec![(0, Offer::single(3.0, 1.0, 0, 2))])], 10.0, 4);
        let t = run(&inst).unwrap();
        // Realized bounds: density 1.5 on both ends, duration 2 on both ends.
        let gamma = gamma_basic(1.0, 1.0).unwrap();
        let beta = 1.5 * (gamma / 10.0).exp_m1();
        assert_eq!(t.primal, 3.0);
        assert_eq!(t.utilities[0], 3.0);
        let expected = 3.0 + 10.0 * 2.0 * beta;
        assert!((t.dual - expected).abs() < 1e-12 * expected);
        assert!((t.dual_objective(&inst) - t.dual).abs() < 1e-12 * expected);
    }

    #[test]
    fn zero_residual_rejects() {
        let inst = instance(vec![request(0, vec![(0, Offer::single(0.0, 1.0, 0, 1))])], 10.0, 2);
        let t = run(&inst).unwrap();
        assert_eq!(t.decisions[0].outcome, Outcome::Rejected);
        assert_eq!(t.decisions[0].residual, 0.0);
        assert_eq!(t.utilities[0], 0.0);
    }

    /// C=1, T={0,1}; n1: v=1,w=1 over {0,1}; n2: v=10,w=1 over {0};
    /// declared theta in [1,10], d in [1,2] so gamma = 2 ln 82.
    #[test]
    fn hand_replay_of_two_requests() {
        let reqs = vec![
            request(0, vec![(0, Offer::single(1.0, 1.0, 0, 2))]),
            Request { id: 1, arrival: 0, offers: [(0, Offer::single(10.0, 1.0, 0, 1))].into_iter().collect() },
        ];
        let mut bounds = BTreeMap::new();
        bounds.insert(0, DeclaredBounds { theta: Some([1.0, 10.0]), d: Some([1.0, 2.0]), ..Default::default() });
        let inst = instance(reqs, 1.0, 2).with_declared_bounds(bounds).unwrap();
        let t = run(&inst).unwrap();

        // n1 sees zero prices and is admitted with u = 1. Afterwards each of
        // its slots costs theta_min (e^gamma - 1) = 82^2 - 1 = 6723, so n2's
        // posted cost is 6723 > 10 and it is rejected.
        let gamma = 2.0 * 82f64.ln();
        assert!((t.pricing.get(0).unwrap().gamma - gamma).abs() < 1e-12);
        assert_eq!(t.decisions[0].outcome, Outcome::Admitted(0));
        assert_eq!(t.decisions[0].utility, 1.0);
        assert!((t.prices.price(0, 0, 0) - 6723.0).abs() < 1e-8);
        assert_eq!(t.decisions[1].outcome, Outcome::Rejected);
        assert!((t.decisions[1].residual - (10.0 - 6723.0)).abs() < 1e-8);
        assert_eq!(t.primal, 1.0);
    }

    #[test]
    fn guarded_mode_blocks_overflow() {
        // Weight equal to capacity violates the precondition; a second
        // overlapping request with a large reward would overflow.
        let reqs = vec![
            request(0, vec![(0, Offer::single(1.0, 1.0, 0, 1))]),
            Request { id: 1, arrival: 0, offers: [(0, Offer::single(1e9, 1.0, 0, 1))].into_iter().collect() },
        ];
        let inst = instance(reqs, 1.0, 1);
        // A deliberately small gamma keeps the posted cost below the reward.
        let pricing = crate::pricing::PricingTable(vec![Some(crate::pricing::ResourcePricing { gamma: 0.1, density_min: 1.0 })]);
        let strict = run_with(&inst, &RunOptions { mode: Mode::Strict, pricing: Some(pricing.clone()) }).unwrap();
        assert_eq!(strict.admitted(), 2);
        assert!(!crate::trace::capacity_violations(&inst, &strict.assignment).is_empty());

        let guarded = run_with(&inst, &RunOptions { mode: Mode::Guarded, pricing: Some(pricing) }).unwrap();
        assert_eq!(guarded.admitted(), 1);
        assert_eq!(guarded.decisions[1].outcome, Outcome::Blocked(0));
        assert!(crate::trace::capacity_violations(&inst, &guarded.assignment).is_empty());
        // The blocked request keeps its utility, so the dual remains feasible.
        assert!(guarded.utilities[1] > 0.0);
    }

    #[test]
    fn variant_mismatch() {
        let inst = instance(vec![], 1.0, 2).with_variant(Variant::MultiDim).unwrap();
        assert!(matches!(run(&inst), Err(Error::VariantMismatch { .. })));
    }
}
