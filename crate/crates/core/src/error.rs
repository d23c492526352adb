use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid probabilities: {0}")]
    InvalidProbabilities(String),

    #[error(
        "canonical form requires equal input and output dimensions (got N={dim_in}, M={dim_out})"
    )]
    NonSquareChannel { dim_in: usize, dim_out: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parameter vector has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("objective is not finite at the starting point")]
    ObjectiveNotFinite,

    #[error("at least {min} repetitions are required (got {got})")]
    TooFewRepetitions { min: usize, got: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
