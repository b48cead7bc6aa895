//! Load-balancing variant: requests arrive in batches and each resource may
//! take at most `q_k` requests from one batch. Every batch is settled by the
//! assignment LP over residual rewards; its optimal dual sets the request
//! utilities and the batch duals `h_k`.

use serde::{Deserialize, Serialize};

use crate::assignment::solve_batch_assignment;
use crate::error::{Error, Result};
use crate::instance::{Instance, Request, Variant};
use crate::pricing::PriceState;
use crate::trace::{Decision, Mode, Observer, Outcome, RunOptions, Trace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchResult {
    pub time: u32,
    /// Request ids in batch order.
    pub requests: Vec<usize>,
    /// Residual rewards; `None` where the request has no offer.
    pub residuals: Vec<Vec<Option<f64>>>,
    /// LP solution before any guarded-mode blocking.
    pub assignment: Vec<Option<usize>>,
    pub u: Vec<f64>,
    pub h: Vec<f64>,
    /// Optimal LP value `sum r x`.
    pub lp_primal: f64,
    /// Optimal dual value `sum u + sum q h`.
    pub lp_dual: f64,
    pub delta_primal: f64,
    pub delta_dual: f64,
}

impl BatchResult {
    pub fn ratio(&self) -> Option<f64> {
        (self.delta_primal > 0.0).then(|| self.delta_dual / self.delta_primal)
    }
}

/// `r_nk = v_nk - w_nk sum_{t in T_nk} p_kt` for every offered pair.
pub fn residual_rewards(batch: &[Request], prices: &PriceState, num_resources: usize) -> Vec<Vec<Option<f64>>> {
    batch
        .iter()
        .map(|req| {
            (0..num_resources)
                .map(|k| {
                    req.offers
                        .get(&k)
                        .map(|o| o.v - o.w[0] * prices.price_sum(k, 0, o.slots(0)))
                })
                .collect()
        })
        .collect()
}

/// Settles one batch: solve the assignment LP, record utilities and batch
/// duals, and reprice every slot taken by an assigned request.
pub fn step_batch(
    trace: &mut Trace,
    instance: &Instance,
    time: u32,
    batch: &[Request],
    mode: Mode,
) -> Result<BatchResult> {
    let residuals = residual_rewards(batch, &trace.prices, instance.num_resources());
    let q: Vec<u32> = instance.resources.iter().map(|r| r.q.unwrap_or(1)).collect();
    let lp = solve_batch_assignment(&residuals, &q);

    let mut delta_primal = 0.0;
    let mut delta_dual = 0.0;
    let batch_term: f64 = lp.h.iter().zip(&q).map(|(h, &q)| h * f64::from(q)).sum();

    for (i, req) in batch.iter().enumerate() {
        let best = residuals[i]
            .iter()
            .enumerate()
            .filter_map(|(k, r)| r.map(|r| (k, r)))
            .fold(None, |acc: Option<(usize, f64)>, (k, r)| match acc {
                Some((_, b)) if b >= r => acc,
                _ => Some((k, r)),
            });
        let k_star = lp.assignment[i].or(best.map(|(k, _)| k));
        let mut decision = Decision {
            step: trace.decisions.len(),
            request: req.id,
            outcome: Outcome::Rejected,
            k_star,
            residual: k_star.and_then(|k| residuals[i][k]).unwrap_or(0.0),
            utility: lp.u[i],
            delta_primal: 0.0,
            delta_dual: lp.u[i],
            gamma: None,
            batch: Some(time),
        };
        trace.utilities[req.id] = lp.u[i];

        if let Some(k) = lp.assignment[i] {
            let offer = &req.offers[&k];
            let capacity = instance.resources[k].capacities[0];
            let pricing = *trace
                .pricing
                .get(k)
                .ok_or(Error::DegenerateOffer { request: req.id, resource: k })?;
            let slots = offer.slots(0);
            if mode == Mode::Guarded && trace.prices.peak_utilization(k, 0, slots.clone()) + offer.w[0] > capacity {
                decision.outcome = Outcome::Blocked(k);
            } else {
                let factors = pricing.factors(offer.w[0], capacity);
                let increase = trace.prices.apply_update(k, 0, slots, factors, offer.w[0])?;
                trace.assignment[req.id] = Some(k);
                decision.outcome = Outcome::Admitted(k);
                decision.gamma = Some(pricing.gamma);
                decision.delta_primal = offer.v;
                decision.delta_dual += capacity * increase;
            }
        }
        // The batch-cap term of the dual is booked on the batch's last row.
        if i + 1 == batch.len() {
            decision.delta_dual += batch_term;
        }
        delta_primal += decision.delta_primal;
        delta_dual += decision.delta_dual;
        trace.record(decision);
    }

    let result = BatchResult {
        time,
        requests: batch.iter().map(|r| r.id).collect(),
        residuals,
        assignment: lp.assignment,
        u: lp.u,
        h: lp.h,
        lp_primal: lp.primal,
        lp_dual: lp.dual,
        delta_primal,
        delta_dual,
    };
    trace.batches.push(result.clone());
    Ok(result)
}

pub fn run_lb(instance: &Instance) -> Result<Trace> {
    run_lb_with(instance, &RunOptions::default())
}

pub fn run_lb_with(instance: &Instance, options: &RunOptions) -> Result<Trace> {
    run_lb_observed(instance, options, &mut ())
}

pub fn run_lb_observed(instance: &Instance, options: &RunOptions, observer: &mut dyn Observer) -> Result<Trace> {
    if instance.variant != Variant::LoadBalance {
        return Err(Error::VariantMismatch { expected: Variant::LoadBalance, found: instance.variant });
    }
    let mut trace = Trace::new(instance, options.pricing_for(instance)?, options.mode);
    for (time, batch) in instance.batches() {
        let first = trace.decisions.len();
        let result = step_batch(&mut trace, instance, time, batch, options.mode)?;
        for i in first..trace.decisions.len() {
            observer.after_step(&trace.decisions[i], &trace.prices);
        }
        observer.after_batch(&result, &trace.prices);
    }
    Ok(trace)
}
