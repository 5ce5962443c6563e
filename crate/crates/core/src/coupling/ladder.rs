use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dist::{build_density, FamilySpec1D, TAIL_LIMIT};
use crate::error::{Error, Result};
use crate::numerics::{cdf_of, convolve, gaussian_pdf, Grid, GridCdf, GridDensity};

/// How block densities are discretized.
///
/// The summand density is tabulated with `points_per_sigma` nodes per
/// standard deviation. A block of `2^j` summands has standard deviation
/// `2^(j/2)`; its grid step doubles every second level so that the relative
/// resolution stays between `points_per_sigma` and `sqrt(2)` times that.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridPolicy {
    pub points_per_sigma: f64,
    /// Block densities are kept on `+/- half_width_sigmas` standard deviations.
    pub half_width_sigmas: f64,
    /// Conditional integrals run over `+/- window_sigmas` conditional standard deviations.
    pub window_sigmas: f64,
}

impl Default for GridPolicy {
    fn default() -> Self {
        Self {
            points_per_sigma: 32.0,
            half_width_sigmas: 14.0,
            window_sigmas: 9.0,
        }
    }
}

impl GridPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.points_per_sigma >= 4.0 && self.points_per_sigma <= 4096.0) {
            return Err(Error::Config(format!(
                "points_per_sigma must lie in [4, 4096], got {}",
                self.points_per_sigma
            )));
        }
        if !(self.half_width_sigmas >= 8.0 && self.half_width_sigmas.is_finite()) {
            return Err(Error::Config(format!(
                "half_width_sigmas must be at least 8, got {}",
                self.half_width_sigmas
            )));
        }
        if !(self.window_sigmas >= 6.0 && self.window_sigmas.is_finite()) {
            return Err(Error::Config(format!(
                "window_sigmas must be at least 6, got {}",
                self.window_sigmas
            )));
        }
        Ok(())
    }

    pub fn base_step(&self) -> f64 {
        1.0 / self.points_per_sigma
    }

    /// Grid step used for blocks of `2^j` summands.
    pub fn step(&self, j: u32) -> f64 {
        self.base_step() * (1u64 << (j / 2)) as f64
    }
}

/// Densities of partial blocks for one coordinate of a standardized law.
///
/// `density(j, t)` is the law of a level-`j` block whose first `t` summands
/// follow the target and whose remaining `2^j - t` are standard Gaussian
/// padding. Unpadded blocks (`t = 2^j`) come from repeated squaring.
#[derive(Debug, Clone)]
pub(crate) struct Ladder {
    full: Vec<GridDensity>,
    mixed: HashMap<(u32, u64), GridDensity>,
    top: GridCdf,
}

fn crop_to(p: GridDensity, half: f64) -> Result<GridDensity> {
    if p.grid().lo() < -half || p.grid().hi() > half {
        p.crop(-half, half)
    } else {
        Ok(p)
    }
}

/// Number of target summands in block `k` of level `j` when only the first
/// `active` summands of the whole sequence are targets.
pub(crate) fn active_in_block(j: u32, k: u64, active: u64) -> u64 {
    let size = 1u64 << j;
    active.saturating_sub(k * size).min(size)
}

impl Ladder {
    pub(crate) fn build(
        spec: &FamilySpec1D,
        depth: u32,
        active: u64,
        policy: &GridPolicy,
    ) -> Result<Self> {
        let h0 = policy.base_step();
        let half0 = policy
            .half_width_sigmas
            .max(spec.required_half_width(TAIL_LIMIT * 1e-4));
        let grid0 = Grid::symmetric(h0, (half0 / h0).ceil() as usize)?;
        let p0 = build_density(spec, &grid0)?;

        let mut full = vec![p0.clone()];
        for j in 1..=depth {
            let prev = &full[j as usize - 1];
            let sd = (2f64).powf(j as f64 / 2.0);
            let mut next = crop_to(convolve(prev, prev)?, policy.half_width_sigmas * sd)?;
            if j % 2 == 0 {
                next = next.decimate(2)?;
            }
            full.push(next);
        }

        let mut mixed = HashMap::new();
        let total = 1u64 << depth;
        if active < total {
            for j in 0..=depth {
                for k in 0..(total >> j) {
                    let t = active_in_block(j, k, active);
                    if t != 1u64 << j && !mixed.contains_key(&(j, t)) {
                        mixed.insert((j, t), mixed_density(&p0, j, t, policy)?);
                    }
                }
            }
        }
        let top = if active < total {
            cdf_of(&mixed[&(depth, active)])
        } else {
            cdf_of(&full[depth as usize])
        };
        Ok(Self { full, mixed, top })
    }

    pub(crate) fn density(&self, j: u32, t: u64) -> &GridDensity {
        if t == 1u64 << j {
            &self.full[j as usize]
        } else {
            &self.mixed[&(j, t)]
        }
    }

    pub(crate) fn top(&self) -> &GridCdf {
        &self.top
    }
}

/// `t`-fold convolution of `p0` plus `2^j - t` standard Gaussian summands,
/// computed at the base step and then thinned to the level-`j` step.
fn mixed_density(p0: &GridDensity, j: u32, t: u64, policy: &GridPolicy) -> Result<GridDensity> {
    let h0 = policy.base_step();
    let w = policy.half_width_sigmas;
    let gauss_count = (1u64 << j) - t;
    let mut acc: Option<GridDensity> = None;
    if gauss_count > 0 {
        let sd = (gauss_count as f64).sqrt();
        let g = Grid::symmetric(h0, (w * sd / h0).ceil() as usize)?;
        acc = Some(GridDensity::from_values(g, g.points().map(|x| gaussian_pdf(x, sd)).collect())?);
    }
    // binary powering of p0, cropping each partial result
    let mut pow = p0.clone();
    let mut pow_count = 1u64;
    let mut e = t;
    while e > 0 {
        if e & 1 == 1 {
            acc = Some(match acc {
                None => pow.clone(),
                Some(a) => {
                    let sd = (a.variance() + pow.variance()).sqrt();
                    crop_to(convolve(&a, &pow)?, w * sd)?
                }
            });
        }
        e >>= 1;
        if e > 0 {
            pow_count *= 2;
            pow = crop_to(convolve(&pow, &pow)?, w * (pow_count as f64).sqrt())?;
        }
    }
    let p = acc.expect("a block holds at least one summand");
    p.decimate(1usize << (j / 2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gaussian_pdf;

    #[test]
    fn steps_double_every_other_level() {
        let p = GridPolicy::default();
        assert_eq!(p.step(0), p.step(1));
        assert_eq!(p.step(2), 2.0 * p.step(0));
        assert_eq!(p.step(5), 4.0 * p.step(0));
    }

    #[test]
    fn gaussian_ladder_is_gaussian() {
        let policy = GridPolicy::default();
        let l = Ladder::build(&FamilySpec1D::standard_gaussian(), 6, 64, &policy).unwrap();
        for j in 0..=6u32 {
            let p = l.density(j, 1 << j);
            assert!((p.grid().step() - policy.step(j)).abs() < 1e-15);
            let sd = (2f64).powf(j as f64 / 2.0);
            let worst = p
                .grid()
                .points()
                .zip(p.values())
                .fold(0.0f64, |m, (x, v)| m.max((v - gaussian_pdf(x, sd)).abs()));
            assert!(worst < 1e-12 / sd, "level {j}: {worst}");
        }
    }

    #[test]
    fn mixed_blocks_have_the_right_variance() {
        let policy = GridPolicy::default();
        let spec = crate::dist::standardize(&FamilySpec1D::poly_gaussian(1.0, 1)).unwrap();
        let l = Ladder::build(&spec, 4, 12, &policy).unwrap();
        assert_eq!(active_in_block(2, 2, 12), 4);
        assert_eq!(active_in_block(2, 3, 12), 0);
        assert_eq!(active_in_block(4, 0, 12), 12);
        let p = l.density(4, 12);
        assert!((p.variance() - 16.0).abs() < 1e-9);
        // the target is platykurtic; padding pulls the kurtosis back toward 3
        let k = |q: &GridDensity| q.expect(|x| x.powi(4)) / q.variance().powi(2);
        let pure = l.density(4, 16);
        assert!(k(p) < 3.0 && k(p) > k(pure), "{} {}", k(p), k(pure));
        assert!((l.density(2, 0).variance() - 4.0).abs() < 1e-9);
    }
}
