use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("Hessian determinant is not positive at {count} node(s) (min {min:e})")]
    NegativeDeterminant { count: usize, min: f64 },

    #[error("permanent of a {0}x{0} matrix exceeds the 22x22 cap")]
    OversizeMatrix(usize),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("sample set is empty")]
    EmptySampleSet,

    #[error("unsupported size: {0}")]
    UnsupportedSize(String),

    #[error("beta must be nonzero")]
    BetaZero,

    #[error("size mismatch: {0} vs {1}")]
    SizeMismatch(usize, usize),

    #[error("measure cannot be atomized within {cap} atoms")]
    UnsupportedMeasure { cap: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error(
        "Newton iteration did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("|Im z| = {0} is outside the truncation window [0, 4]")]
    OutOfWindow(f64),

    #[error("matrix entry ({row}, {col}) is negative")]
    NegativeEntry { row: usize, col: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

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
