//! Conditional law of a difference given a sum.
//!
//! For independent `A ~ p`, `B ~ q`, the difference `W = A - B` given
//! `A + B = s` has density proportional to `p((s+w)/2) q((s-w)/2)`. Everything
//! here works in the variable `a = (s+w)/2`, which runs over the nodes of `p`'s
//! grid; `q` is interpolated at `s - a`. Because `a` advances by whole steps,
//! the fractional offset into `q`'s grid is the same for every node, so the
//! interpolation is a fixed 4-tap filter.

use crate::error::{Error, Result};
use crate::numerics::cdf::{solve_decreasing, solve_increasing, GridCdf, TailProb};
use crate::numerics::grid::{lagrange4, Grid, GridDensity};
use crate::numerics::quad;

/// Normalizer below which conditioning is declared degenerate.
pub const UNDERFLOW_LIMIT: f64 = 1e-300;

/// Reusable buffers for repeated conditional evaluations.
#[derive(Debug, Default, Clone)]
pub struct ConditionalScratch {
    g: Vec<f64>,
    cells: Vec<f64>,
}

impl ConditionalScratch {
    pub fn new() -> Self {
        Self::default()
    }
}

#[derive(Debug, Clone, Copy)]
struct Window {
    a0: f64,
    step: f64,
    total: f64,
}

fn fill(
    p: &GridDensity,
    q: &GridDensity,
    s: f64,
    a_range: Option<(f64, f64)>,
    scratch: &mut ConditionalScratch,
) -> Result<Window> {
    let (gp, gq) = (p.grid(), q.grid());
    if !gp.same_step(gq) {
        return Err(Error::GridMismatch {
            left: gp.step(),
            right: gq.step(),
        });
    }
    if !s.is_finite() {
        return Err(Error::Domain(format!("conditioning value {s}")));
    }
    let h = gp.step();
    let mut a_min = gp.lo().max(s - gq.hi());
    let mut a_max = gp.hi().min(s - gq.lo());
    if let Some((lo, hi)) = a_range {
        a_min = a_min.max(lo);
        a_max = a_max.min(hi);
    }
    let underflow = || Error::ConditioningUnderflow { s, normalizer: 0.0 };
    if a_max <= a_min {
        return Err(underflow());
    }
    let i0 = ((a_min - gp.lo()) / h - 1e-9).ceil().max(0.0) as usize;
    let i1 = (((a_max - gp.lo()) / h + 1e-9).floor() as usize).min(gp.n_points() - 1);
    if i1 < i0 + 1 {
        return Err(underflow());
    }

    let t_base = (s - gp.lo() - gq.lo()) / h;
    let j_base = t_base.floor();
    let w = lagrange4(t_base - j_base);
    let j_base = j_base as isize;

    let pv = p.values();
    scratch.g.clear();
    scratch.g.extend((i0..=i1).map(|i| {
        let j = j_base - i as isize - 1;
        let qv = w[0] * q.at(j) + w[1] * q.at(j + 1) + w[2] * q.at(j + 2) + w[3] * q.at(j + 3);
        pv[i] * qv.max(0.0)
    }));
    quad::cell_integrals_into(&scratch.g, h, &mut scratch.cells);
    let total: f64 = scratch.cells.iter().sum();
    if !(total > UNDERFLOW_LIMIT && total.is_finite()) {
        return Err(Error::ConditioningUnderflow {
            s,
            normalizer: total,
        });
    }
    Ok(Window {
        a0: gp.x(i0),
        step: h,
        total,
    })
}

/// Conditional cdf of `A - B` given `A + B = s`, tabulated on the `w` grid
/// `w_i = 2 a_i - s` (step `2h`).
pub fn conditional_diff_cdf(p: &GridDensity, q: &GridDensity, s: f64) -> Result<GridCdf> {
    let mut scratch = ConditionalScratch::new();
    let win = fill(p, q, s, None, &mut scratch)?;
    let grid = Grid::from_step(2.0 * win.a0 - s, 2.0 * win.step, scratch.g.len());
    // slopes with respect to w are half the slopes with respect to a
    let half: Vec<f64> = scratch.g.iter().map(|v| 0.5 * v).collect();
    GridCdf::from_cells(grid, &half, &scratch.cells)
}

/// Quantile of `A - B` given `A + B = s` without materializing the cdf.
///
/// `a_range` optionally restricts the integration window in the `a`
/// variable; mass outside it is treated as zero.
pub fn conditional_diff_quantile(
    p: &GridDensity,
    q: &GridDensity,
    s: f64,
    prob: TailProb,
    a_range: Option<(f64, f64)>,
    scratch: &mut ConditionalScratch,
) -> Result<f64> {
    let win = fill(p, q, s, a_range, scratch)?;
    let g = &scratch.g;
    let cells = &scratch.cells;
    let h = win.step;
    let n = g.len();
    let a = match prob {
        TailProb::Lower(u) => {
            let target = u * win.total;
            let mut acc = 0.0;
            let mut found = None;
            for (i, c) in cells.iter().enumerate() {
                if acc + c > target {
                    found = Some((i, acc, acc + c));
                    break;
                }
                acc += c;
            }
            match found {
                Some((i, f0, f1)) => {
                    win.a0 + (i as f64 + solve_increasing(f0, f1, g[i] * h, g[i + 1] * h, target)) * h
                }
                None => win.a0 + (n - 1) as f64 * h,
            }
        }
        TailProb::Upper(qp) => {
            let target = qp * win.total;
            let mut acc = 0.0;
            let mut found = None;
            for i in (0..n - 1).rev() {
                let next = acc + cells[i];
                if next >= target {
                    found = Some((i, next, acc));
                    break;
                }
                acc = next;
            }
            match found {
                Some((i, s0, s1)) => {
                    win.a0 + (i as f64 + solve_decreasing(s0, s1, g[i] * h, g[i + 1] * h, target)) * h
                }
                None => win.a0,
            }
        }
    };
    Ok(2.0 * a - s)
}
