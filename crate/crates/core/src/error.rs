use thiserror::Error;

use crate::instance::Variant;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed instance: {0}")]
    Structure(String),

    #[error("request {request} offer on resource {resource} is degenerate (positive reward, zero weight-time)")]
    DegenerateOffer { request: usize, resource: usize },

    #[error("offer is degenerate (positive reward, zero weight-time)")]
    Degenerate,

    #[error("offer has no positive weight")]
    NoPositiveWeight,

    #[error("fluctuation ratio out of domain: {0}")]
    Domain(String),

    #[error("slot {slot} outside horizon of length {horizon}")]
    OutOfHorizon { slot: u32, horizon: u32 },

    #[error("algorithm expects a {expected} instance, got {found}")]
    VariantMismatch { expected: Variant, found: Variant },

    #[error("instance too large for the exact oracle: {requests} requests (cap {cap})")]
    TooLarge { requests: usize, cap: usize },

    #[error("invalid generator config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status for the command-line front end: 2 for I/O and
    /// parse failures, 1 for everything semantic.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Json(_) | Error::Csv(_) | Error::Structure(_) => 2,
            _ => 1,
        }
    }
}
