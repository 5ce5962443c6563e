use serde::{Deserialize, Serialize};

use crate::diagnostics::{ProbePoint, ProbeReport};
use crate::dist::{build_density, FamilySpec1D};
use crate::error::{Error, Result};
use crate::numerics::{
    conditional_diff_cdf, gaussian_quantile, gaussian_quantile_upper, self_convolve_pow2, Grid,
};
use crate::stats::linear_fit;

/// Probabilities below this are treated as lost to underflow.
const TINY: f64 = 1e-200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SandwichSetup {
    pub level: u32,
    /// Conditioning sums, in units of the block standard deviation.
    pub s_grid: Vec<f64>,
    /// Difference values, in the same units.
    pub z_grid: Vec<f64>,
    pub points_per_sigma: f64,
}

impl Default for SandwichSetup {
    fn default() -> Self {
        Self {
            level: 4,
            s_grid: vec![-1.0, 0.0, 1.0],
            z_grid: (0..=16).map(|i| -4.0 + 0.5 * i as f64).collect(),
            points_per_sigma: 32.0,
        }
    }
}

/// Fits the smallest `C` with
/// `Phi_sigma(z - g(z)) <= F(z | s) <= Phi_sigma(z + g(z))`, `g(z) = C tau (1 + z^2/sigma^2)`,
/// where `F(. | s)` is the conditional cdf of the difference of the two
/// halves of a level-`n` block given their sum `s`, and `sigma^2 = 2^n var`.
///
/// The per-point shift `|z - Phi_sigma^{-1}(F(z|s))|` is reported as the
/// empirical value. Exploratory: the report always passes.
pub fn sandwich_probe(family: &FamilySpec1D, tau: f64, setup: &SandwichSetup) -> Result<ProbeReport> {
    if setup.level == 0 || setup.level > 12 {
        return Err(Error::Config(format!("sandwich level {} outside 1..=12", setup.level)));
    }
    if setup.z_grid.is_empty() || setup.s_grid.is_empty() {
        return Err(Error::Insufficient("empty s or z grid".into()));
    }
    let var = family.moments().1;
    let sd = var.sqrt();
    let grid = Grid::covering(family.required_half_width(1e-14), sd / setup.points_per_sigma)?;
    let child = self_convolve_pow2(&build_density(family, &grid)?, setup.level - 1)?;
    let sigma = (var * (1u64 << setup.level) as f64).sqrt();
    let mut shifts = Vec::new();
    let mut excluded = 0;
    for &s in &setup.s_grid {
        let cdf = conditional_diff_cdf(&child, &child, s * sigma)?;
        for &z in &setup.z_grid {
            let w = z * sigma;
            let (lower, upper) = (cdf.eval(w), cdf.eval_upper(w));
            if lower.min(upper) < TINY {
                excluded += 1;
                continue;
            }
            let matched = if lower <= upper {
                gaussian_quantile(lower, sigma)
            } else {
                gaussian_quantile_upper(upper, sigma)
            };
            shifts.push((s, z, (w - matched).abs()));
        }
    }
    if shifts.is_empty() {
        return Err(Error::Insufficient("every sandwich point underflowed".into()));
    }
    let shape = |z: f64| if tau > 0.0 { tau * (1.0 + z * z) } else { 1.0 + z * z };
    let c = shifts.iter().map(|&(_, z, g)| g / shape(z)).fold(0.0, f64::max);
    let points = shifts
        .iter()
        .map(|&(s, z, g)| ProbePoint::new(format!("s={s},z={z}"), z, g, c * shape(z), 0.0))
        .collect();
    let mut report = ProbeReport::from_points("sandwich", points)
        .fit("C", c)
        .fit("level", setup.level as f64)
        .fit("sigma", sigma);
    let zz: Vec<f64> = shifts.iter().map(|&(_, z, _)| z * z).collect();
    let gs: Vec<f64> = shifts.iter().map(|&(_, _, g)| g).collect();
    if let Ok(f) = linear_fit(&zz, &gs) {
        report = report.fit("z2_slope", f.slope).fit("z2_intercept", f.intercept).fit("z2_r2", f.r2);
    }
    if tau == 0.0 {
        report = report.note("tau = 0: C is the raw maximal shift");
    }
    if excluded > 0 {
        report = report.note(format!("{excluded} points excluded (cdf underflow)"));
    }
    Ok(report)
}
