use crate::error::{Error, Result};
use crate::numerics::grid::{Grid, GridDensity};
use crate::numerics::quad;

/// Cumulative distribution tabulated on a grid.
///
/// Both the lower cumulative `F` and the survival `1 - F` are stored, each
/// accumulated from its own end, so that quantiles deep in either tail keep
/// full relative precision. `density` holds the matching slopes `F'`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCdf {
    grid: Grid,
    values: Vec<f64>,
    upper: Vec<f64>,
    density: Vec<f64>,
}

/// Which side of the distribution a probability refers to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailProb {
    /// `P(X <= x) = p`
    Lower(f64),
    /// `P(X > x) = p`
    Upper(f64),
}

impl TailProb {
    /// Picks the side with the smaller probability, given both (which sum to 1).
    pub fn from_pair(lower: f64, upper: f64) -> Self {
        if lower <= upper {
            TailProb::Lower(lower)
        } else {
            TailProb::Upper(upper)
        }
    }
}

impl GridCdf {
    /// Builds the cdf from a tabulated (not necessarily normalized) density `g` on `grid`.
    pub(crate) fn from_unnormalized(grid: Grid, g: &[f64]) -> Result<Self> {
        let cells = quad::cell_integrals(g, grid.step());
        Self::from_cells(grid, g, &cells)
    }

    pub(crate) fn from_cells(grid: Grid, g: &[f64], cells: &[f64]) -> Result<Self> {
        let n = g.len();
        debug_assert_eq!(cells.len() + 1, n);
        let total: f64 = cells.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::NonFinite(format!("cdf normalizer {total}")));
        }
        let mut values = Vec::with_capacity(n);
        let mut acc = 0.0;
        values.push(0.0);
        for c in cells {
            acc += c;
            values.push((acc / total).min(1.0));
        }
        values[n - 1] = 1.0;
        let mut upper = vec![0.0; n];
        let mut acc = 0.0;
        for i in (0..n - 1).rev() {
            acc += cells[i];
            upper[i] = (acc / total).min(1.0);
        }
        upper[0] = 1.0;
        let density = g.iter().map(|v| v.max(0.0) / total).collect();
        Ok(Self {
            grid,
            values,
            upper,
            density,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Lower cumulative values `F(x_i)`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Survival values `1 - F(x_i)`.
    pub fn upper_values(&self) -> &[f64] {
        &self.upper
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// `F(x)`, monotone cubic Hermite between nodes.
    pub fn eval(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x <= g.lo() {
            return 0.0;
        }
        if x >= g.hi() {
            return 1.0;
        }
        let t = (x - g.lo()) / g.step();
        let i = (t.floor() as usize).min(g.n_points() - 2);
        let h = g.step();
        interp_increasing(
            self.values[i],
            self.values[i + 1],
            self.density[i] * h,
            self.density[i + 1] * h,
            t - i as f64,
        )
        .clamp(0.0, 1.0)
    }

    /// `1 - F(x)` evaluated from the survival table.
    pub fn eval_upper(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x <= g.lo() {
            return 1.0;
        }
        if x >= g.hi() {
            return 0.0;
        }
        let t = (x - g.lo()) / g.step();
        let i = (t.floor() as usize).min(g.n_points() - 2);
        let h = g.step();
        interp_decreasing(
            self.upper[i],
            self.upper[i + 1],
            self.density[i] * h,
            self.density[i + 1] * h,
            t - i as f64,
        )
        .clamp(0.0, 1.0)
    }

    /// Generalized inverse `sup{x : F(x) <= u}` for `u` in (0, 1).
    pub fn invert(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain(format!("quantile level {u} not in (0, 1)")));
        }
        Ok(self.quantile(TailProb::from_pair(u, 1.0 - u)))
    }

    /// Quantile for a probability given on either side.
    pub fn quantile(&self, p: TailProb) -> f64 {
        let g = &self.grid;
        let h = g.step();
        match p {
            TailProb::Lower(u) => {
                // first node with F > u; F[0] = 0 <= u
                let j = self.values.partition_point(|&v| v <= u);
                if j >= self.values.len() {
                    return g.hi();
                }
                if j == 0 {
                    return g.lo();
                }
                let i = j - 1;
                let t = solve_increasing(
                    self.values[i],
                    self.values[i + 1],
                    self.density[i] * h,
                    self.density[i + 1] * h,
                    u,
                );
                g.x(i) + t * h
            }
            TailProb::Upper(q) => {
                // last node with S >= q; S is nonincreasing
                let j = self.upper.partition_point(|&v| v >= q);
                if j == 0 {
                    return g.lo();
                }
                let i = j - 1;
                if i + 1 >= self.upper.len() {
                    return g.hi();
                }
                let t = solve_decreasing(
                    self.upper[i],
                    self.upper[i + 1],
                    self.density[i] * h,
                    self.density[i + 1] * h,
                    q,
                );
                g.x(i) + t * h
            }
        }
    }
}

/// Normalized cdf of a grid density.
pub fn cdf_of(p: &GridDensity) -> GridCdf {
    GridCdf::from_unnormalized(*p.grid(), p.values())
        .expect("a normalized GridDensity has positive finite mass")
}

/// Convenience wrapper: `sup{x : F(x) <= u}`.
pub fn invert_cdf(cdf: &GridCdf, u: f64) -> Result<f64> {
    cdf.invert(u)
}

// Within a cell the cumulative is interpolated in log space whenever both
// end values are positive: for densities with Gaussian-like tails `log F` is
// close to quadratic, so the cubic Hermite stays accurate relative to `F`
// itself far into the tail, where interpolating `F` directly would not.
// `m0`, `m1` are slopes per unit `t` (density times step).

fn interp_increasing(f0: f64, f1: f64, m0: f64, m1: f64, t: f64) -> f64 {
    if f0 > 0.0 {
        let (a, b) = monotone_slopes(f0.ln(), f1.ln(), m0 / f0, m1 / f1);
        eval_cubic(f0.ln(), f1.ln(), a, b, t).exp()
    } else {
        let (a, b) = monotone_slopes(f0, f1, m0, m1);
        eval_cubic(f0, f1, a, b, t)
    }
}

fn interp_decreasing(s0: f64, s1: f64, m0: f64, m1: f64, t: f64) -> f64 {
    if s1 > 0.0 {
        let (l0, l1) = (-s0.ln(), -s1.ln());
        let (a, b) = monotone_slopes(l0, l1, m0 / s0, m1 / s1);
        (-eval_cubic(l0, l1, a, b, t)).exp()
    } else {
        let (a, b) = monotone_slopes(-s0, -s1, m0, m1);
        -eval_cubic(-s0, -s1, a, b, t)
    }
}

/// `t` in `[0, 1]` where the increasing cumulative with end values `f0 <= target < f1`
/// reaches `target`.
pub(crate) fn solve_increasing(f0: f64, f1: f64, m0: f64, m1: f64, target: f64) -> f64 {
    if f0 > 0.0 && target > 0.0 {
        solve_hermite(f0.ln(), f1.ln(), m0 / f0, m1 / f1, target.ln())
    } else {
        solve_hermite(f0, f1, m0, m1, target)
    }
}

/// `t` in `[0, 1]` where the decreasing survival function with end values
/// `s0 >= target > s1` falls to `target`. `m0`, `m1` are the (positive) densities.
pub(crate) fn solve_decreasing(s0: f64, s1: f64, m0: f64, m1: f64, target: f64) -> f64 {
    if s1 > 0.0 && target > 0.0 {
        solve_hermite(-s0.ln(), -s1.ln(), m0 / s0, m1 / s1, -target.ln())
    } else {
        solve_hermite(-s0, -s1, m0, m1, -target)
    }
}

/// Slopes (per unit `t`) for the Hermite cubic, replaced by the secant when the
/// Fritsch-Carlson condition fails so the interpolant stays monotone.
#[inline]
fn monotone_slopes(f0: f64, f1: f64, m0: f64, m1: f64) -> (f64, f64) {
    let delta = f1 - f0;
    if delta == 0.0 {
        return (0.0, 0.0);
    }
    let a = m0 / delta;
    let b = m1 / delta;
    if a < 0.0 || b < 0.0 || a * a + b * b > 9.0 {
        (delta, delta)
    } else {
        (m0, m1)
    }
}

#[inline]
fn eval_cubic(f0: f64, f1: f64, m0: f64, m1: f64, t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * f0
        + (t3 - 2.0 * t2 + t) * m0
        + (-2.0 * t3 + 3.0 * t2) * f1
        + (t3 - t2) * m1
}

/// Solves `H(t) = target` on `[0, 1]` for the monotone Hermite cubic with
/// endpoint values `f0 <= target < f1` and per-unit-`t` slopes `m0`, `m1`.
/// Newton steps safeguarded by bisection.
fn solve_hermite(f0: f64, f1: f64, m0: f64, m1: f64, target: f64) -> f64 {
    let delta = f1 - f0;
    if !(delta > 0.0) {
        return 0.0;
    }
    if target <= f0 {
        return 0.0;
    }
    let (m0, m1) = monotone_slopes(f0, f1, m0, m1);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut t = ((target - f0) / delta).clamp(0.0, 1.0);
    for _ in 0..60 {
        let v = eval_cubic(f0, f1, m0, m1, t) - target;
        if v > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let t2 = t * t;
        let dv = (6.0 * t2 - 6.0 * t) * f0
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (-6.0 * t2 + 6.0 * t) * f1
            + (3.0 * t2 - 2.0 * t) * m1;
        let mut next = if dv > 0.0 { t - v / dv } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 1e-15 || hi - lo <= 1e-15 {
            return next;
        }
        t = next;
    }
    t
}
