use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} contains a non-finite value at ({row}, {col})")]
    NonFinite {
        what: String,
        row: usize,
        col: usize,
    },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{name} is not positive semidefinite (minimum eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { name: String, min_eigenvalue: f64 },

    #[error("{name} is not positive definite")]
    NotPositiveDefinite { name: String },

    #[error("factorization of {name} failed")]
    Factorization { name: String },

    #[error("ADMM diverged at iteration {iteration} (iterate norm {norm:e})")]
    Divergence { iteration: usize, norm: f64 },

    #[error("solve failed at lambda = {lambda}: {source}")]
    PathSolve {
        lambda: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("groups indistinguishable: the two sample covariances are identical")]
    Indistinguishable,

    #[error("dimension p = {p} exceeds the limit of {max} for this computation: {reason}")]
    TooLarge {
        p: usize,
        max: usize,
        reason: &'static str,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn shape(
        context: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    ) -> Self {
        Error::DimensionMismatch {
            context,
            expected: format!("{}x{}", expected.0, expected.1),
            found: format!("{}x{}", found.0, found.1),
        }
    }

    /// True for errors caused by malformed input files.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::Parse { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
