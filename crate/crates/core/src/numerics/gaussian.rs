//! Centered normal distribution function and quantile, `Phi_sigma`.
//!
//! Both tails are exposed separately: `gaussian_cdf(x)` loses relative
//! precision for large positive `x` (the value rounds to 1), so callers that
//! need the upper tail should use [`gaussian_sf`] / [`gaussian_quantile_upper`].

use libm::erfc;
use statrs::function::erf::erfc_inv;
use std::f64::consts::{PI, SQRT_2};

pub fn gaussian_pdf(x: f64, sigma: f64) -> f64 {
    let z = x / sigma;
    (-0.5 * z * z).exp() / ((2.0 * PI).sqrt() * sigma)
}

/// `P(N(0, sigma^2) <= x)`.
pub fn gaussian_cdf(x: f64, sigma: f64) -> f64 {
    0.5 * erfc(-x / (sigma * SQRT_2))
}

/// `P(N(0, sigma^2) > x)`.
pub fn gaussian_sf(x: f64, sigma: f64) -> f64 {
    0.5 * erfc(x / (sigma * SQRT_2))
}

/// Inverse of [`gaussian_cdf`]. Saturates to `-inf`/`+inf` at 0 and 1.
pub fn gaussian_quantile(u: f64, sigma: f64) -> f64 {
    -sigma * standard_upper_quantile(u)
}

/// Inverse of [`gaussian_sf`]: the `x` with `P(N(0, sigma^2) > x) = q`.
pub fn gaussian_quantile_upper(q: f64, sigma: f64) -> f64 {
    sigma * standard_upper_quantile(q)
}

/// `z` with `P(N(0,1) > z) = q`: the `erfc_inv` estimate plus one Halley
/// step against the accurate `erfc`, which brings it to full precision.
fn standard_upper_quantile(q: f64) -> f64 {
    let z = SQRT_2 * erfc_inv(2.0 * q);
    if !z.is_finite() || q <= 0.0 || q >= 1.0 {
        return z;
    }
    let dens = gaussian_pdf(z, 1.0);
    if dens == 0.0 {
        return z;
    }
    // f(z) = sf(z) - q, f' = -phi, f'' = z phi
    let r = (gaussian_sf(z, 1.0) - q) / dens;
    z + r / (1.0 + 0.5 * z * r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        assert_eq!(gaussian_cdf(0.0, 1.0), 0.5);
        assert!((gaussian_cdf(2.0, 2.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((gaussian_cdf(1.0, 1.0) - gaussian_cdf(2.0, 2.0)).abs() < 1e-16);
        assert!((gaussian_pdf(0.0, 1.0) - 0.398_942_280_401_432_7).abs() < 1e-16);
        assert!((gaussian_quantile(0.975, 1.0) - 1.959_963_984_540_054).abs() < 1e-12);
    }

    #[test]
    fn roundtrip_lower_side() {
        for sigma in [0.5, 1.0, 3.0] {
            let mut x = -8.0 * sigma;
            while x <= 4.5 * sigma {
                let back = gaussian_quantile(gaussian_cdf(x, sigma), sigma);
                assert!((back - x).abs() < 1e-10 * sigma.max(1.0), "{x} -> {back}");
                x += 0.37 * sigma;
            }
        }
    }

    #[test]
    fn roundtrip_upper_side() {
        for sigma in [0.5, 1.0, 3.0] {
            let mut x = -4.5 * sigma;
            while x <= 8.0 * sigma {
                let back = gaussian_quantile_upper(gaussian_sf(x, sigma), sigma);
                assert!((back - x).abs() < 1e-10 * sigma.max(1.0), "{x} -> {back}");
                x += 0.37 * sigma;
            }
        }
    }

    #[test]
    fn tails_are_complementary() {
        for &x in &[-6.0, -1.0, 0.3, 5.0] {
            assert!((gaussian_cdf(x, 1.0) + gaussian_sf(x, 1.0) - 1.0).abs() < 1e-15);
        }
    }
}
