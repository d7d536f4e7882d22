use thiserror::Error;

/// Errors produced by the monitoring toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is singular (pivot {pivot:e} below threshold)")]
    SingularMatrix { pivot: f64 },

    #[error("matrix is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("eigenvalue iteration did not converge after {sweeps} sweeps")]
    NonConvergence { sweeps: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("model is not stationary (max companion eigenvalue magnitude {max_modulus:.6})")]
    NotStationary { max_modulus: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Phase-I degrees of freedom exhausted (mn - m - v + 1 = {0})")]
    DegreesOfFreedomExhausted(i64),

    #[error("residuals require {needed} history rows, found {found}")]
    MissingHistory { needed: usize, found: usize },

    #[error("regressor Gram matrix is rank deficient")]
    RankDeficientRegressors,

    #[error("series has zero variance")]
    ZeroVariance,

    #[error("{censored} of {replications} replications hit the cap of {cap} inspections")]
    ExcessiveCensoring {
        censored: usize,
        replications: usize,
        cap: usize,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
