//! Multi-dimensional variant. Admission compares the reward against the
//! posted cost summed over every dimension of the resource; on admission each
//! dimension is repriced with its own factors but the resource's shared gamma.

use crate::error::{Error, Result};
use crate::instance::{Instance, Request, Variant};
use crate::pricing::{posted_cost, PriceState};
use crate::trace::{Decision, Mode, Observer, Outcome, RunOptions, Trace};

pub fn select_resource_md(request: &Request, prices: &PriceState) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (&k, offer) in &request.offers {
        let residual = offer.v - posted_cost(prices, offer, k);
        if best.map_or(true, |(_, b)| residual > b) {
            best = Some((k, residual));
        }
    }
    best
}

pub fn step_md(trace: &mut Trace, instance: &Instance, request: &Request, mode: Mode) -> Result<Decision> {
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
    let Some((k, residual)) = select_resource_md(request, &trace.prices) else {
        trace.record(decision.clone());
        return Ok(decision);
    };
    decision.k_star = Some(k);
    decision.residual = residual;

    if residual > 0.0 {
        let offer = &request.offers[&k];
        let resource = &instance.resources[k];
        let pricing = *trace
            .pricing
            .get(k)
            .ok_or(Error::DegenerateOffer { request: request.id, resource: k })?;
        decision.utility = residual;
        trace.utilities[request.id] = residual;

        let overflows = mode == Mode::Guarded
            && (0..offer.dims()).any(|m| {
                offer.w[m] > 0.0
                    && trace.prices.peak_utilization(k, m, offer.slots(m)) + offer.w[m] > resource.capacities[m]
            });
        if overflows {
            decision.outcome = Outcome::Blocked(k);
            decision.delta_dual = residual;
        } else {
            let mut delta_dual = residual;
            for m in 0..offer.dims() {
                let capacity = resource.capacities[m];
                let factors = pricing.factors(offer.w[m], capacity);
                let increase = trace.prices.apply_update(k, m, offer.slots(m), factors, offer.w[m])?;
                delta_dual += capacity * increase;
            }
            trace.assignment[request.id] = Some(k);
            decision.outcome = Outcome::Admitted(k);
            decision.gamma = Some(pricing.gamma);
            decision.delta_primal = offer.v;
            decision.delta_dual = delta_dual;
        }
    }
    trace.record(decision.clone());
    Ok(decision)
}

pub fn run_md(instance: &Instance) -> Result<Trace> {
    run_md_with(instance, &RunOptions::default())
}

pub fn run_md_with(instance: &Instance, options: &RunOptions) -> Result<Trace> {
    run_md_observed(instance, options, &mut ())
}

pub fn run_md_observed(instance: &Instance, options: &RunOptions, observer: &mut dyn Observer) -> Result<Trace> {
    if instance.variant != Variant::MultiDim {
        return Err(Error::VariantMismatch { expected: Variant::MultiDim, found: instance.variant });
    }
    let mut trace = Trace::new(instance, options.pricing_for(instance)?, options.mode);
    for request in &instance.requests {
        let decision = step_md(&mut trace, instance, request, options.mode)?;
        observer.after_step(&decision, &trace.prices);
    }
    Ok(trace)
}
