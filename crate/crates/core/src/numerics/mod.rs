//! Grid-based 1-D density arithmetic.

mod cdf;
mod conditional;
mod convolve;
mod gaussian;
mod grid;
pub mod quad;

pub use cdf::{cdf_of, invert_cdf, GridCdf, TailProb};
pub use conditional::{
    conditional_diff_cdf, conditional_diff_quantile, ConditionalScratch, UNDERFLOW_LIMIT,
};
pub use convolve::{
    convolve, convolve_within, fft_linear_convolution, self_convolve_pow2,
    self_convolve_pow2_cropped, MAX_POINTS,
};
pub use gaussian::{
    gaussian_cdf, gaussian_pdf, gaussian_quantile, gaussian_quantile_upper, gaussian_sf,
};
pub use grid::{Grid, GridDensity};

