use thiserror::Error;

/// Errors raised while building or evaluating an abstraction.
#[derive(Debug, Error)]
pub enum Error {
    /// Matrix shapes or vector lengths do not agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A modelling assumption is violated (threshold, horizon, controllability).
    #[error("assumption violated: {0}")]
    Assumption(String),

    /// A covariance that must be positive definite is not.
    #[error("numerical degeneracy: {what} (smallest eigenvalue {min_eigenvalue:e})")]
    Degenerate { what: String, min_eigenvalue: f64 },

    /// A Gaussian probability underflowed below the representable range.
    #[error("probability underflow ({0:e})")]
    Underflow(f64),

    /// A transition row violates interval feasibility.
    #[error("infeasible row {row}: {reason}")]
    InfeasibleRow { row: usize, reason: String },

    /// Invalid or incomplete configuration.
    #[error("configuration error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("empty input: {0}")]
    Empty(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
