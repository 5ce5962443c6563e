use thiserror::Error;

/// Errors raised by the numeric core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid range too small: tail mass {tail_mass:.3e} exceeds {limit:.1e} (need half-width >= {required_half_width:.3})")]
    RangeTooSmall {
        tail_mass: f64,
        limit: f64,
        required_half_width: f64,
    },

    #[error("invalid family specification: {0}")]
    FamilySpec(String),

    #[error("grid mismatch: step {left} vs {right}")]
    GridMismatch { left: f64, right: f64 },

    #[error("grid exhausted: {0}")]
    GridExhausted(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("conditioning underflow at s = {s}: normalizer {normalizer:.3e}")]
    ConditioningUnderflow { s: f64, normalizer: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),
}

pub type Result<T> = std::result::Result<T, Error>;
