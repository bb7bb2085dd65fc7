use thiserror::Error;

/// Errors raised by the optimizer, the objective registry and the estimators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown objective `{id}`; valid ids: {valid}")]
    UnknownObjective { id: String, valid: String },

    #[error("unknown check `{id}`; valid ids: {valid}")]
    UnknownCheck { id: String, valid: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed objective spec `{spec}`: {reason}")]
    MalformedSpec { spec: String, reason: String },

    #[error("dimension mismatch: objective has d={expected}, point has d={found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("objective returned non-finite value {value} at iteration {iteration}")]
    NonFiniteObjective { value: f64, iteration: u64 },

    #[error("objective `{0}` has no spatial suboptimality oracle")]
    NoSuboptimalityOracle(String),
}

pub type Result<T> = std::result::Result<T, Error>;
