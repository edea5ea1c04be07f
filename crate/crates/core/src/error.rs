use thiserror::Error;

/// Errors raised by the analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("eigenvalue {index} is not positive ({value})")]
    NonPositiveEigenvalue { index: usize, value: f64 },

    #[error("vectors belong to different bases ({left:?} vs {right:?})")]
    BasisMismatch { left: u64, right: u64 },

    #[error("assumption violated for {what}: operator norm {norm} exceeds 1 - {tol}")]
    AssumptionViolated { what: String, norm: f64, tol: f64 },

    #[error("matrix is not positive definite: smallest eigenvalue {min_eigenvalue}")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("matrix is not positive semidefinite: smallest eigenvalue {min_eigenvalue}")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("rank deficiency: {0}")]
    RankDeficient(String),

    #[error("requested {requested} components but numerical rank is {rank}")]
    RankTooLow { requested: usize, rank: usize },

    #[error("insufficient samples: need more than {required}, got {got}")]
    InsufficientSamples { required: usize, got: usize },

    #[error("grids do not match")]
    GridMismatch,

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
