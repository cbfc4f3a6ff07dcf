use thiserror::Error;

/// Errors raised by the simulators, solvers and analytics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time {t} is outside the environment horizon [0, {horizon}]")]
    OutOfRange { t: f64, horizon: f64 },

    #[error("invalid selection: mean fitness denominator {0} is not positive")]
    InvalidSelection(f64),

    #[error("invalid scaling: per-event immigration probability {0} exceeds 1")]
    InvalidScaling(f64),

    #[error("invalid closure order {0}: at least 2 is required")]
    InvalidOrder(usize),

    #[error("numerical domain error: {0}")]
    NumericalDomain(String),

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("no invariant measure: {0}")]
    NoInvariantMeasure(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
