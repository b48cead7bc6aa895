//! Online primal-dual admission control for multiple knapsacks whose items
//! occupy a resource only over a time window.
//!
//! Requests arrive one at a time (or in batches) and each may be placed on one
//! of several resources for a fixed interval of slots. Every slot of every
//! resource carries a posted price that grows exponentially with its
//! utilization; a request is admitted to the resource where its reward most
//! exceeds the posted cost, if that excess is positive.
//!
//! Three variants are provided:
//!
//! - [`basic::run`]: one request per step, single-dimensional demands.
//! - [`lb::run_lb`]: batched arrivals with a per-batch cap `q_k` on each
//!   resource, each batch settled by an assignment LP ([`assignment`]).
//! - [`md::run_md`]: multi-dimensional demands with per-dimension intervals.
//!
//! Every run records the primal and dual objectives step by step in a
//! [`Trace`], which can be audited against an exact offline optimum
//! ([`oracle`]) for small instances.
//!
//! ```
//! use omkd::{basic, Instance, Offer, Request, Resource, Variant};
//!
//! let requests = vec![Request {
//!     id: 0,
//!     arrival: 0,
//!     offers: [(0, Offer::single(3.0, 0.1, 0, 2))].into_iter().collect(),
//! }];
//! let instance = Instance::new(4, Variant::Basic, vec![Resource::single(0, 1.0)], requests).unwrap();
//! let trace = basic::run(&instance).unwrap();
//! assert_eq!(trace.primal, 3.0);
//! assert!(trace.dual >= trace.primal);
//! ```

pub mod assignment;
pub mod basic;
pub mod error;
pub mod generators;
pub mod harness;
pub mod instance;
pub mod lb;
pub mod md;
pub mod oracle;
pub mod pricing;
pub mod trace;

pub use error::{Error, Result};
pub use instance::{
    effective_stats, fluctuation_stats, validate_instance, DeclaredBounds, FluctuationStats, Instance, Offer,
    Request, Resource, TheoremMode, ValidationReport, Variant,
};
pub use pricing::{PriceState, PricingTable};
pub use trace::{Decision, Mode, Observer, Outcome, RunOptions, Trace};
