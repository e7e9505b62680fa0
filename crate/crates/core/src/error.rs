use thiserror::Error;

/// Errors produced by the simulation and optimization routines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("degenerate working point: signal slope {slope:e} is numerically zero")]
    DegenerateWorkingPoint { slope: f64 },

    #[error("no inflection point: signal is flat on the search interval")]
    NoInflection,

    #[error("unconstrained geometry: {0}")]
    UnconstrainedGeometry(String),

    #[error("degenerate variance: measurement variance matrix vanishes on the requested subspace")]
    DegenerateVariance,

    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),

    #[error("unknown protocol `{0}`")]
    UnknownProtocol(String),

    #[error("constraint violation for `{name}`: {detail}")]
    ConstraintViolation { name: String, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
