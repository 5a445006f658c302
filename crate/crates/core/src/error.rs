use thiserror::Error;

/// Tensor construction or shape-compatibility failure.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("shape error: {0}")]
pub struct ShapeError(pub String);

impl ShapeError {
    pub fn new(msg: impl Into<String>) -> Self {
        ShapeError(msg.into())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Shape(#[from] ShapeError),

    /// A value fell outside the domain of a function (for example `log(x)` with
    /// `x <= 0`, or a conjugate evaluated outside its effective domain).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("backward requires a scalar output, got shape {0:?}")]
    NotScalar(Vec<usize>),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Two routes to the same quantity disagreed beyond tolerance.
    #[error("inconsistent results: {0}")]
    Inconsistent(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Training hit a non-finite loss; carries the iteration and a textual
    /// dump of the state at the time of the abort.
    #[error("numerical abort at iteration {iteration}: {reason}")]
    NumericalAbort {
        iteration: usize,
        reason: String,
        diagnostic: String,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
