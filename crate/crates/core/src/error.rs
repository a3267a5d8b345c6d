use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Tabulated element patterns are malformed or do not cover a query.
    #[error("element pattern error: {0}")]
    Ingestion(String),

    /// The array geometry produces a (numerically) singular total-power matrix.
    #[error("degenerate geometry: smallest eigenvalue {min_eig:e} <= threshold {threshold:e}")]
    DegenerateGeometry { min_eig: f64, threshold: f64 },

    /// Cholesky-type factorization hit a non-positive pivot.
    #[error("factorization failed at pivot {index}: value {pivot:e}")]
    Factorization { index: usize, pivot: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// The secular equation could not be bracketed.
    #[error("secular bracket [{lo:e}, {hi:e}] does not change sign (f1 = {f_lo:e}, {f_hi:e})")]
    Bracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    /// A numerical failure inside the ADMM loop, tagged with the iteration.
    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by user input rather than the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Io { .. } | Error::Parse { .. } | Error::Ingestion(_)
        )
    }
}
