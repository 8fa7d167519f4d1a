use thiserror::Error;

/// Errors raised by the optimizers, the subproblem solver and the data loaders.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not symmetric (asymmetry {asymmetry:e}, scale {scale:e})")]
    NotSymmetric { asymmetry: f64, scale: f64 },

    #[error("matrix is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("compact middle matrix is numerically singular (min |eig| {min_abs:e}, norm {norm:e})")]
    SingularMiddle { min_abs: f64, norm: f64 },

    #[error("basis matrix is rank deficient (rank {rank} of {cols})")]
    RankDeficient { rank: usize, cols: usize },

    #[error("line search failed: {0}")]
    LineSearch(String),

    #[error("numerical defect: {0}")]
    Defect(String),

    #[error("IDX parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("dataset validation failed: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
