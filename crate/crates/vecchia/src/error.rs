use thiserror::Error;

/// Errors produced by the approximation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument was outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inputs whose shapes or lengths do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A value overflowed or became non-finite during evaluation.
    #[error("overflow: {0}")]
    Overflow(String),

    /// Cholesky factorization hit a non-positive pivot. `unit` identifies the
    /// block (grouped) or permuted row (ungrouped) that failed.
    #[error(
        "covariance factorization failed in conditioning unit {unit}: matrix is not positive \
         definite (coincident locations with zero nugget? consider setting a small jitter)"
    )]
    Factorization { unit: usize },

    /// The design-matrix normal equations were singular.
    #[error("rank deficiency: {0}")]
    RankDeficient(String),

    /// A dense-oracle computation was requested above the configured cap.
    #[error("dense oracle requested for n = {n} but the cap is {cap}")]
    OracleTooLarge { n: usize, cap: usize },

    /// Invalid configuration or construction input.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A numerical optimizer exhausted its evaluation budget.
    #[error("optimizer did not converge within {evals} evaluations")]
    NonConvergence { evals: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
