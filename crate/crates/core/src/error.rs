use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite value {what} at grid point {index} (x = {position:?})")]
    NonFinite {
        what: String,
        index: usize,
        position: [f64; 3],
    },

    #[error("imaginary residue {residue:e} exceeds {threshold:e} at grid point {index}")]
    ImaginaryResidue {
        residue: f64,
        threshold: f64,
        index: usize,
    },

    #[error("normalization drift: norm {norm} differs from 1 by more than {bound:e}")]
    Normalization { norm: f64, bound: f64 },

    #[error("numerical divergence at t = {t} (dt = {dt}); last finite state at t = {last_good}")]
    Divergence { t: f64, dt: f64, last_good: f64 },

    #[error("trajectory lacks data for this check: {0}")]
    MissingData(String),

    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("scenario validation failed:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
