use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the distribution-regression toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed CSV input. `line` is 1-based and counts the header.
    #[error("{path}:{line}: {message}")]
    Csv {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("unknown group {0}")]
    UnknownGroup(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Sinkhorn iterations stopped before the marginal residual reached the tolerance.
    #[error("sinkhorn did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("embedding fingerprint mismatch: {expected} vs {found}")]
    FingerprintMismatch { expected: String, found: String },

    #[error("cholesky factorization failed even with diagonal jitter {jitter:e}")]
    Factorization { jitter: f64 },

    #[error("target has zero variance")]
    ZeroVariance,

    #[error("{items} items cannot be split into {folds} folds")]
    TooFewItems { items: usize, folds: usize },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics (non-convergence, factorization) as
    /// opposed to bad input or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. } | Error::Factorization { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
