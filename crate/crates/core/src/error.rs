use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("basis size {dim} too small: need at least {min}")]
    BasisTooSmall { dim: usize, min: usize },

    #[error("coupling constant must be non-negative, got {0}")]
    NegativeCoupling(f64),

    #[error("invalid oscillator power m={0}: need m >= 2")]
    InvalidPower(u32),

    #[error(
        "degenerate case unsupported: diagonal entries {first} and {second} differ by {gap:e} (threshold {threshold:e})"
    )]
    Degenerate {
        first: usize,
        second: usize,
        gap: f64,
        threshold: f64,
    },

    #[error("matrix is not symmetric at ({row}, {col}): {upper} vs {lower}")]
    NotSymmetric {
        row: usize,
        col: usize,
        upper: f64,
        lower: f64,
    },

    #[error("matrix is not square: {field} has {found} entries, expected {expected}")]
    NotSquare {
        field: String,
        found: usize,
        expected: usize,
    },

    #[error("non-finite matrix entry at {field}")]
    NonFinite { field: String },

    #[error("state index {index} out of range for basis of size {dim}")]
    StateOutOfRange { index: usize, dim: usize },

    #[error("z = {z} sits on (or within {distance:e} of) a pole of the kernel")]
    Pole { z: f64, distance: f64 },

    #[error("path sum diverges: term ratio >= 1 for 5 consecutive orders ending at l = {order}")]
    PathSumDivergence { order: usize },

    #[error(
        "root search failed on interval [{lower}, {upper}] after {iterations} iterations (last residual {residual:e})"
    )]
    NoConvergence {
        lower: f64,
        upper: f64,
        iterations: usize,
        residual: f64,
    },

    #[error("no sign change of the root function on [{lower}, {upper}]")]
    NoSignChange { lower: f64, upper: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fit is ill-conditioned: {0}")]
    IllConditioned(String),

    #[error("malformed matrix file: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
