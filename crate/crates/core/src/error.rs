use thiserror::Error;

/// Errors produced by the optimization library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimension {0}")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// The objective returned a non-finite value or failed outright.
    #[error("oracle failure at {point:?}: {message}")]
    OracleFailure { point: Vec<f64>, message: String },

    #[error("point is outside the domain")]
    OutsideDomain,

    #[error("empty run record")]
    EmptyRecord,

    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },

    #[error("no comparator available: {0}")]
    MissingComparator(String),

    #[error("operation requires a stochastic loss stream")]
    NotStochastic,
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
