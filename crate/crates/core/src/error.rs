use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid basis specification: {0}")]
    InvalidBasis(String),

    #[error("basis index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("integrand is not finite at x = {x:e} (value {value})")]
    NonFiniteIntegrand { x: f64, value: f64 },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("overlap matrix condition estimate {condition:e} exceeds limit {limit:e}")]
    IllConditioned { condition: f64, limit: f64 },

    #[error("eigenvalue iteration did not converge after {iterations} iterations")]
    EigenNoConvergence { iterations: usize },

    #[error("no admissible real eigenvalue")]
    NoAdmissibleEigenvalue,

    #[error("no bound state (lowest admissible eigenvalue {lowest:e} is not below threshold)")]
    NoBoundState { lowest: f64 },

    #[error("eigenpair residual {residual:e} exceeds tolerance {tolerance:e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },

    #[error("coefficient vector is zero")]
    ZeroVector,

    #[error("state is not normalized (norm factor {0})")]
    NotNormalized(f64),

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("no sign change on [{lo}, {hi}]: g(lo) = {g_lo}, g(hi) = {g_hi}")]
    Bracket { lo: f64, hi: f64, g_lo: f64, g_hi: f64 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
