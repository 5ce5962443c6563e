use serde::{Deserialize, Serialize};

use crate::dist::{conjugate_parts, FamilySpec1D};
use crate::error::{Error, Result};
use crate::numerics::GridDensity;

/// Number of `z` nodes scanned on `[-r, r]`.
const Z_NODES: usize = 401;

/// A point where the normalized third derivative was evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub u: f64,
    pub v: f64,
    pub z: f64,
    pub ratio: f64,
}

/// Numeric evidence for membership of a one-dimensional law in the class
/// `|phi'''(z)| <= tau * sigma^2` on `|z| <= z_radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub family: String,
    pub tau_hat: f64,
    pub z_radius: f64,
    pub variance: f64,
    pub max_third_derivative: f64,
    /// Largest ratios found, in decreasing order.
    pub witnesses: Vec<Witness>,
    pub warnings: Vec<String>,
}

impl ClassReport {
    /// Whether the scanned radius reaches the analyticity radius `1/tau_hat`
    /// the class condition asks about.
    pub fn covers_domain(&self) -> bool {
        self.tau_hat * self.z_radius >= 1.0
    }
}

/// Estimates the smallest `tau` with `|phi'''(z)| <= tau * sigma^2` for real
/// `|z| <= z_radius`, where `phi` is the log-MGF and `sigma^2` the variance.
///
/// `phi'''(z)` is the third central moment of the conjugate law at `z`,
/// which is tabulated around its own bulk, so no tail of the untilted
/// density is ever exponentially reweighted. If a conjugate law cannot be
/// tabulated the radius is shrunk and a warning recorded.
pub fn estimate_tau(family: &FamilySpec1D, z_radius: f64) -> Result<ClassReport> {
    family.validate()?;
    if !(z_radius.is_finite() && z_radius > 0.0) {
        return Err(Error::Domain(format!("z_radius must be positive, got {z_radius}")));
    }
    let var = family.moments().1;
    let mut warnings = Vec::new();
    let mut r = z_radius;
    let (witnesses, r) = loop {
        match scan(family, r) {
            Ok(w) => break (w, r),
            Err(e @ (Error::GridExhausted(_) | Error::NonFinite(_) | Error::RangeTooSmall { .. })) => {
                if r < 1e-6 * z_radius {
                    return Err(e);
                }
                r *= 0.8;
            }
            Err(e) => return Err(e),
        }
    };
    if r < z_radius {
        warnings.push(format!("z_radius shrunk from {z_radius} to {r} (MGF overflow)"));
    }
    let max_third = witnesses.iter().map(|w| w.ratio * var).fold(0.0, f64::max);
    let mut top = witnesses;
    top.sort_by(|a, b| b.ratio.total_cmp(&a.ratio));
    top.truncate(5);
    Ok(ClassReport {
        family: family.to_string(),
        tau_hat: top[0].ratio,
        z_radius: r,
        variance: var,
        max_third_derivative: max_third,
        witnesses: top,
        warnings,
    })
}

fn scan(family: &FamilySpec1D, r: f64) -> Result<Vec<Witness>> {
    let var = family.moments().1;
    (0..Z_NODES)
        .map(|i| {
            let z = -r + 2.0 * r * i as f64 / (Z_NODES - 1) as f64;
            let d3 = third_cumulant(&conjugate_parts(family, z, POINTS_PER_SD)?.1);
            if !d3.is_finite() {
                return Err(Error::NonFinite(format!("third cumulant at z = {z}")));
            }
            Ok(Witness { u: 1.0, v: 1.0, z, ratio: d3.abs() / var })
        })
        .collect()
}

const POINTS_PER_SD: f64 = 64.0;

fn third_cumulant(p: &GridDensity) -> f64 {
    let m = p.mean();
    p.expect(|x| (x - m).powi(3))
}
