use thiserror::Error;

/// Errors raised by the numerical routines and the Monte Carlo harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("matrix is not positive definite (minimum eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("matrix is rank deficient (minimum singular value {min_singular_value:e})")]
    RankDeficient { min_singular_value: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(
        "{solver} did not converge after {iterations} iterations \
         (last objective {objective}, optimality gap {gap:e})"
    )]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        objective: f64,
        gap: f64,
    },

    #[error("{failed} of {total} trials failed numerically (first failure: {first})")]
    TooManyFailures {
        failed: usize,
        total: usize,
        first: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
