use thiserror::Error;

/// Errors produced by the simulation pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid system size {0}: a chain needs at least 2 spins")]
    InvalidSize(usize),

    #[error("coupling J_{index} is exactly zero; resample the realization")]
    DegenerateCoupling { index: usize },

    #[error("transverse field must be positive, got {0}")]
    InvalidField(f64),

    #[error("temperature must be non-negative and finite, got {0}")]
    InvalidTemperature(f64),

    #[error("spectrum length mismatch: {left} modes vs {right} modes")]
    ShapeMismatch { left: usize, right: usize },

    #[error(
        "diagonalization failed for n={n}: {reason} \
         (max |entry| = {max_entry:e}, frobenius norm = {frobenius:e})"
    )]
    Diagonalization {
        n: usize,
        reason: String,
        max_entry: f64,
        frobenius: f64,
    },

    #[error("heat pattern W={w:e}, Q_c={q_c:e}, Q_h={q_h:e} is forbidden by the Clausius inequality")]
    ClausiusViolation { q_c: f64, q_h: f64, w: f64 },

    #[error("{skipped} of {total} realizations failed to diagonalize (ceiling is 1%)")]
    TooManySkips { skipped: usize, total: usize },

    #[error("power-law fit needs at least 3 points, got {0}")]
    Underdetermined(usize),

    #[error("power-law fit requires positive values, got {value} at n={n}")]
    NonPositive { n: f64, value: f64 },

    #[error("curve abscissae must be strictly increasing (violated at index {0})")]
    Unsorted(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
