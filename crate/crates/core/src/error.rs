use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the analysis routines.
#[derive(Debug, Error)]
pub enum CapsetError {
    #[error("invalid LP problem: {0}")]
    InvalidProblem(String),

    #[error("simplex failed to converge after {iterations} iterations ({context})")]
    NumericalFailure { iterations: usize, context: String },

    #[error("invalid dictionary shape: {0}")]
    InvalidShape(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("support of size {size} exceeds the oracle cap of {cap}")]
    TooLarge { size: usize, cap: usize },

    #[error("pair partition requires an even support, got {0} indices")]
    OddSupport(usize),

    #[error("no pair (k, l) with q_k + q_l > 0")]
    EmptyDomain,

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CapsetError {
    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        CapsetError::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Prefix the context of a [`CapsetError::NumericalFailure`] so callers can
    /// tell which capacity index or pair triggered it.
    pub fn with_context(self, what: impl AsRef<str>) -> Self {
        match self {
            CapsetError::NumericalFailure {
                iterations,
                context,
            } => CapsetError::NumericalFailure {
                iterations,
                context: format!("{}: {}", what.as_ref(), context),
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, CapsetError>;
