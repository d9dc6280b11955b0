//! Shared error type for the analysis modules.

/// Errors produced by the numerical operations in this crate.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// The caller violated an operation's contract (bad dimension, empty
    /// interval, index out of range, non-finite input, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A computation produced a non-finite value or an iteration failed to
    /// converge. The message carries the diagnostics (step index, norm,
    /// iteration count).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A parameter search exhausted its grid without finding a feasible
    /// candidate.
    #[error("estimation failure: {0}")]
    EstimationFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
