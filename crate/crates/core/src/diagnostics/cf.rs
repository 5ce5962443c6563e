use std::f64::consts::PI;

use crate::diagnostics::{ProbePoint, ProbeReport};
use crate::dist::{build_density, FamilySpec1D};
use crate::error::{Error, Result};
use crate::numerics::{Grid, GridDensity};

/// `|CF|` value; `flagged` marks frequencies the grid cannot resolve or
/// values lost to underflow, both reported as 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfAbs {
    pub value: f64,
    pub flagged: bool,
}

/// A conjugate law prepared for repeated evaluation of its characteristic function.
#[derive(Debug, Clone)]
pub struct TiltedCf {
    xs: Vec<f64>,
    w: Vec<f64>,
    step: f64,
}

impl TiltedCf {
    /// Trapezoid weights of `e^{h x} p(x) / MGF(h)`, accumulated in shifted log space.
    pub fn new(p: &GridDensity, h: f64) -> Self {
        let g = p.grid();
        let v = p.values();
        let n = v.len();
        let m = (0..n)
            .filter(|&i| v[i] > 0.0)
            .map(|i| h * g.x(i) + v[i].ln())
            .fold(f64::NEG_INFINITY, f64::max);
        let mut w: Vec<f64> = (0..n)
            .map(|i| if v[i] > 0.0 { (h * g.x(i) + v[i].ln() - m).exp() } else { 0.0 })
            .collect();
        w[0] *= 0.5;
        w[n - 1] *= 0.5;
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        // phases are taken about the mean to keep them small
        let centre: f64 = (0..n).map(|i| w[i] * g.x(i)).sum();
        let xs = (0..n).map(|i| g.x(i) - centre).collect();
        Self { xs, w, step: g.step() }
    }

    /// Largest `|t|` evaluated; beyond it the trapezoid sum aliases.
    pub fn max_resolved_t(&self) -> f64 {
        0.5 * PI / self.step
    }

    pub fn abs(&self, t: f64) -> CfAbs {
        if t.abs() > self.max_resolved_t() {
            return CfAbs { value: 0.0, flagged: true };
        }
        let (mut re, mut im) = (0.0, 0.0);
        for (x, w) in self.xs.iter().zip(&self.w) {
            let (s, c) = (t * x).sin_cos();
            re += w * c;
            im += w * s;
        }
        let value = re.hypot(im).min(1.0);
        if value < 1e-300 {
            CfAbs { value: 0.0, flagged: true }
        } else {
            CfAbs { value, flagged: false }
        }
    }
}

/// `|E e^{(h+it) X}| / E e^{h X}` for `X` with density `p`, by trapezoid quadrature.
pub fn cf_abs(p: &GridDensity, h: f64, t: f64) -> CfAbs {
    TiltedCf::new(p, h).abs(t)
}

/// Absolute error floor of a normalized trapezoid CF sum in double precision.
const ROUNDING_FLOOR: f64 = 1e-12;

/// `(2 + t^2) e^{-t^2/2}`, the bound on the conjugate CF of the raw
/// one-dimensional polynomial-Gaussian law.
pub fn polygauss_cf_bound(t: f64) -> f64 {
    (2.0 + t * t) * (-0.5 * t * t).exp()
}

/// Compares the numeric conjugate CF of the raw polynomial-Gaussian law
/// (`d_param = 1`) with [`polygauss_cf_bound`] on an `(h, t)` grid.
/// Slack is the rounding floor of the quadrature sum.
pub fn polygauss_cf_check(tau: f64, hs: &[f64], ts: &[f64]) -> Result<ProbeReport> {
    if hs.is_empty() || ts.is_empty() {
        return Err(Error::Insufficient("empty h or t grid".into()));
    }
    let h_max = hs.iter().fold(0.0f64, |m, h| m.max(h.abs()));
    let t_max = ts.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let step = 0.02f64.min(0.25 / t_max.max(1.0));
    let grid = Grid::covering(h_max + 16.0, step)?;
    let p = build_density(&FamilySpec1D::poly_gaussian(tau, 1), &grid)?;
    let mut points = Vec::with_capacity(hs.len() * ts.len());
    let mut flagged = 0;
    for &h in hs {
        let cf = TiltedCf::new(&p, h);
        for &t in ts {
            let v = cf.abs(t);
            flagged += v.flagged as usize;
            points.push(ProbePoint::new(format!("h={h},t={t}"), t, v.value, polygauss_cf_bound(t), ROUNDING_FLOOR));
        }
    }
    let mut r = ProbeReport::from_points("cf_bound", points).fit("tau", tau);
    if flagged > 0 {
        r = r.note(format!("{flagged} points below resolution or underflowed"));
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{gaussian_pdf, self_convolve_pow2};

    fn density(f: &FamilySpec1D, half_width: f64, step: f64) -> GridDensity {
        build_density(f, &Grid::covering(half_width, step).unwrap()).unwrap()
    }

    #[test]
    fn one_at_zero() {
        let p = density(&FamilySpec1D::raised_cosine(1.0), 2.0, 0.01);
        for h in [0.0, 2.0, -3.0] {
            assert!((cf_abs(&p, h, 0.0).value - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn gaussian_modulus_ignores_tilt() {
        let g = Grid::covering(30.0, 0.02).unwrap();
        let p = GridDensity::from_values(g, g.points().map(|x| gaussian_pdf(x, 1.0)).collect()).unwrap();
        for h in [0.0, 1.0, -4.0, 9.0] {
            for t in [0.3, 1.0, 2.5, 5.0] {
                let v = cf_abs(&p, h, t).value;
                assert!((v - (-0.5 * t * t).exp()).abs() < 1e-12, "h={h} t={t}: {v}");
            }
        }
    }

    #[test]
    fn polygauss_closed_form() {
        for tau in [0.3, 1.0] {
            let p = density(&FamilySpec1D::poly_gaussian(tau, 1), 26.0, 0.02);
            for h in [0.0, 0.8, -2.5] {
                for t in [0.5, 1.7, 4.0] {
                    let t2 = tau * tau;
                    let re = 4.0 + t2 * (1.0 + h * h - t * t);
                    let im = 2.0 * t2 * h * t;
                    let exact = (-0.5 * t * t).exp() * re.hypot(im) / (4.0 + t2 * (1.0 + h * h));
                    let v = cf_abs(&p, h, t).value;
                    assert!((v - exact).abs() < 1e-12, "tau={tau} h={h} t={t}");
                    assert!(v <= polygauss_cf_bound(t));
                }
            }
        }
    }

    #[test]
    fn block_cf_is_power_of_summand_cf() {
        let f = FamilySpec1D::smoothed_compact(FamilySpec1D::uniform(1.0), 0.2);
        let p = density(&f, 5.0, 0.01);
        let n = 4;
        let block = self_convolve_pow2(&p, n).unwrap();
        // larger tilts amplify the FFT round-off left in the block's tails
        for h in [0.0, 0.3] {
            let one = TiltedCf::new(&p, h);
            let many = TiltedCf::new(&block, h);
            for t in [0.05, 0.2, 0.5, 1.0] {
                let a = many.abs(t).value;
                let b = one.abs(t).value.powi(1 << n);
                assert!((a - b).abs() < 1e-7, "h={h} t={t}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn unresolved_frequency_is_flagged() {
        let p = density(&FamilySpec1D::standard_gaussian(), 10.0, 0.1);
        let v = cf_abs(&p, 0.0, 100.0);
        assert!(v.flagged && v.value == 0.0);
    }

    #[test]
    fn polygauss_check_passes() {
        let r = polygauss_cf_check(0.5, &[-1.8, 0.0, 1.8], &[0.0, 1.0, 3.0, 10.0]).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.points.len(), 12);
    }
}
