use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::numerics::grid::{Grid, GridDensity};

/// Upper bound on grid sizes produced by convolution.
pub const MAX_POINTS: usize = 1 << 23;

/// Linear convolution of two sequences via zero-padded FFT.
pub fn fft_linear_convolution(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n_out = a.len() + b.len() - 1;
    if a.len().min(b.len()) <= 32 {
        let mut out = vec![0.0; n_out];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        return out;
    }
    let len = n_out.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let mut fa: Vec<Complex<f64>> = a.iter().map(|&x| Complex::new(x, 0.0)).collect();
    fa.resize(len, Complex::new(0.0, 0.0));
    let mut fb: Vec<Complex<f64>> = b.iter().map(|&x| Complex::new(x, 0.0)).collect();
    fb.resize(len, Complex::new(0.0, 0.0));
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / len as f64;
    fa[..n_out].iter().map(|c| c.re * scale).collect()
}

/// Density of the sum of independent variables with densities `p` and `q`.
///
/// The output grid spans the full support sum `[p.lo + q.lo, p.hi + q.hi]`.
pub fn convolve(p: &GridDensity, q: &GridDensity) -> Result<GridDensity> {
    let (grid, values) = raw_convolution(p, q)?;
    Ok(GridDensity::from_values(grid, values)?
        .with_discarded(p.discarded_mass() + q.discarded_mass()))
}

/// Like [`convolve`], but keeps only the nodes inside `[lo, hi]`. The mass cut
/// off is recorded in [`GridDensity::discarded_mass`].
pub fn convolve_within(p: &GridDensity, q: &GridDensity, lo: f64, hi: f64) -> Result<GridDensity> {
    convolve(p, q)?.crop(lo, hi)
}

fn raw_convolution(p: &GridDensity, q: &GridDensity) -> Result<(Grid, Vec<f64>)> {
    let (gp, gq) = (p.grid(), q.grid());
    if !gp.same_step(gq) {
        return Err(Error::GridMismatch {
            left: gp.step(),
            right: gq.step(),
        });
    }
    let n = gp.n_points() + gq.n_points() - 1;
    if n > MAX_POINTS {
        return Err(Error::GridExhausted(format!(
            "convolution would need {n} points (limit {MAX_POINTS})"
        )));
    }
    let h = gp.step();
    let mut values = fft_linear_convolution(p.values(), q.values());
    // FFT round-off leaves ~1e-16 relative noise of either sign in the tails.
    values.iter_mut().for_each(|v| *v = (*v * h).max(0.0));
    Ok((Grid::from_step(gp.lo() + gq.lo(), h, n), values))
}

/// Density of the `2^m`-fold convolution of `p`, by `m` squarings.
///
/// After each squaring the support is cropped to `mean +/- crop_sigmas * sd`
/// (when that is narrower than the full support), so the grid grows like
/// `2^(k/2)` rather than `2^k`.
pub fn self_convolve_pow2(p: &GridDensity, m: u32) -> Result<GridDensity> {
    self_convolve_pow2_cropped(p, m, 14.0)
}

pub fn self_convolve_pow2_cropped(p: &GridDensity, m: u32, crop_sigmas: f64) -> Result<GridDensity> {
    if m > 24 {
        return Err(Error::Domain(format!("2^{m}-fold convolution exceeds 2^24")));
    }
    let mut cur = p.clone();
    for _ in 0..m {
        let next = convolve(&cur, &cur)?;
        let (mu, sd) = (next.mean(), next.variance().sqrt());
        let (lo, hi) = (mu - crop_sigmas * sd, mu + crop_sigmas * sd);
        cur = if lo > next.grid().lo() || hi < next.grid().hi() {
            next.crop(lo, hi)?
        } else {
            next
        };
    }
    Ok(cur)
}
