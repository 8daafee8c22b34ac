use thiserror::Error;

/// Errors raised by the lattice, metric, encoder and solver routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite amplitude at site {0}")]
    NonFinite(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("nonpositive conformal factor: omega2 = {value} at (t = {t}, x = {x})")]
    NonpositiveConformalFactor { t: f64, x: f64, value: f64 },

    #[error("zero-norm field")]
    ZeroNorm,

    #[error("conformal weight {value} below floor {floor} at site {site}")]
    WeightBelowFloor { site: usize, value: f64, floor: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("invalid metric table: {0}")]
    Table(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
