//! Error type shared across the crate, with the exit-code contract used by
//! the command-line tool.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A dimension or parameter failed validation; names the offending field.
    #[error("invalid {field}: {message}")]
    Invalid { field: &'static str, message: String },

    /// Cholesky factorization hit a non-positive pivot.
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    /// An estimated covariance stayed non-positive-definite after the one
    /// permitted jitter retry.
    #[error("estimated covariance for {context} is not positive definite even after jitter")]
    JitterExhausted { context: &'static str },

    /// A dense validation-only routine was asked to build a system larger
    /// than the configured cap.
    #[error("dense validation path refused: {size} rows exceed cap {cap}")]
    DenseCapExceeded { size: usize, cap: usize },

    /// The forward filter lost positive definiteness of a covariance.
    #[error("filter covariance lost positive definiteness at step {step}")]
    FilterDiverged { step: usize },

    /// Simulated paths kept exceeding the explosion threshold.
    #[error("gave up after {attempts} consecutive explosive paths (seed {seed})")]
    ExplosiveConfiguration { attempts: usize, seed: u64 },

    /// Too many Monte Carlo replications failed to estimate.
    #[error("{failed}/{total} replications failed; first failure: {first}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        first: String,
    },

    /// Malformed input data; `line` is 1-based within the offending file.
    #[error("input error at line {line}: {message}")]
    Input { line: usize, message: String },

    /// An identity check exceeded its tolerance.
    #[error("validation failed for {name}: max deviation {max_dev:e} > tolerance {tol:e} (seed {seed})")]
    IdentityBreach {
        name: &'static str,
        max_dev: f64,
        tol: f64,
        seed: u64,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(field: &'static str, message: impl Into<String>) -> Self {
        Error::Invalid {
            field,
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for input/validation problems, 3 for numerical
    /// failures. 0 (success) is never produced here.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invalid { .. }
            | Error::Input { .. }
            | Error::DenseCapExceeded { .. }
            | Error::ExplosiveConfiguration { .. }
            | Error::Io { .. } => 2,
            Error::NotPositiveDefinite { .. }
            | Error::JitterExhausted { .. }
            | Error::FilterDiverged { .. }
            | Error::TooManyFailures { .. }
            | Error::IdentityBreach { .. } => 3,
        }
    }
}
