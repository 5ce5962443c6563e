//! Dyadic (KMT-style) coupling of sums of almost-Gaussian random vectors with
//! Gaussian sums, together with the grid numerics it runs on and a set of
//! numeric diagnostics for the hypotheses it relies on.

pub mod coupling;
pub mod diagnostics;
pub mod dist;
pub mod dyadic;
pub mod error;
pub mod numerics;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
