use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("not a probability vector: {0}")]
    NotNormalized(String),

    /// Relative entropy with `p_c > 0` where `q_c = 0`.
    #[error("divergence undefined: support of p not contained in support of q (index {index})")]
    DivergenceUndefined { index: usize },

    /// A precondition stated as an inequality or equality was not met; carries
    /// the measured quantity.
    #[error("constraint violated: {what} (measured {measured})")]
    ConstraintViolated { what: String, measured: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("degenerate: {0}")]
    Degenerate(String),

    /// A proven inequality failed on a concrete instance.
    #[error("invariant violated: {0}")]
    InvariantViolated(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn violated(what: impl Into<String>, measured: f64) -> Self {
        Error::ConstraintViolated {
            what: what.into(),
            measured,
        }
    }
}
