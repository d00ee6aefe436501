use thiserror::Error;

/// Errors raised by the objective, solver and map machinery.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("neuron index {index} out of range for {m} neurons")]
    IndexOutOfRange { index: usize, m: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empirical density has no samples")]
    EmptyDensity,

    #[error("posterior is not normalized at a probe point (sum = {sum})")]
    NonNormalized { sum: f64 },

    #[error("pair marginal is {0} at a probe point")]
    InvalidPairMarginal(&'static str),

    #[error("{engine} engine is not available for the {density} density")]
    EngineUnavailable {
        engine: &'static str,
        density: &'static str,
    },

    #[error("independent-events form requested for a correlated firing model")]
    CorrelatedFiring,

    #[error("enumeration of {states} firing vectors exceeds the budget of {budget}")]
    EnumerationBudget { states: u128, budget: u128 },

    #[error("{0}")]
    Unsupported(String),

    #[error("posterior family does not match the requested operation: {0}")]
    WrongPosterior(&'static str),

    #[error("input density is zero at the probe point")]
    ZeroDensity,

    #[error("fixed-point iteration did not converge after {iters} iterations (last change {residual:e})")]
    NotConverged { iters: usize, residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
