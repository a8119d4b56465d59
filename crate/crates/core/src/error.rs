use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid window [{t0}, {t1})")]
    InvalidWindow { t0: f64, t1: f64 },

    #[error("time {t} outside [0, {horizon}]")]
    OutOfRange { t: f64, horizon: f64 },

    #[error("horizon mismatch: {left} vs {right}")]
    HorizonMismatch { left: f64, right: f64 },

    #[error("insufficient horizon: need {needed}, trajectory covers {available}")]
    InsufficientHorizon { needed: f64, available: f64 },

    #[error("series truncation failed: tail bound {bound:e} after {terms} terms exceeds {tolerance:e}")]
    Truncation { terms: usize, bound: f64, tolerance: f64 },

    #[error("invalid cdf: {0}")]
    InvalidCdf(String),

    #[error("occupancy configuration has no black particle")]
    EmptyOccupancy,

    #[error("mismatched samples: {0}")]
    Mismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
