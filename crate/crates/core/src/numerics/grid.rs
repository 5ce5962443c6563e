use crate::error::{Error, Result};
use crate::numerics::quad;

/// Uniform 1-D grid: points `lo + i * step` for `i in 0..n_points`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    lo: f64,
    hi: f64,
    n_points: usize,
    step: f64,
}

impl Grid {
    pub const MIN_POINTS: usize = 16;

    pub fn new(lo: f64, hi: f64, n_points: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::InvalidGrid(format!("need lo < hi, got [{lo}, {hi}]")));
        }
        if n_points < Self::MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "need at least {} points, got {n_points}",
                Self::MIN_POINTS
            )));
        }
        let step = (hi - lo) / (n_points - 1) as f64;
        Ok(Self { lo, hi, n_points, step })
    }

    /// Grid `{-k*step, .., 0, .., k*step}` with `2k+1` points. Zero is an exact node.
    pub fn symmetric(step: f64, half_points: usize) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidGrid(format!("step must be positive, got {step}")));
        }
        let n = 2 * half_points + 1;
        if n < Self::MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "need at least {} points, got {n}",
                Self::MIN_POINTS
            )));
        }
        Ok(Self::from_step(-(half_points as f64) * step, step, n))
    }

    /// Symmetric grid covering `[-half_width, half_width]` with the given step.
    pub fn covering(half_width: f64, step: f64) -> Result<Self> {
        let k = (half_width / step).ceil().max(8.0) as usize;
        Self::symmetric(step, k)
    }

    pub(crate) fn from_step(lo: f64, step: f64, n_points: usize) -> Self {
        debug_assert!(n_points >= 2 && step > 0.0);
        Self {
            lo,
            hi: lo + (n_points - 1) as f64 * step,
            n_points,
            step,
        }
    }

    #[inline]
    pub fn lo(&self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        self.hi
    }

    #[inline]
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    #[inline]
    pub fn step(&self) -> f64 {
        self.step
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.step
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.x(i))
    }

    pub(crate) fn same_step(&self, other: &Grid) -> bool {
        (self.step - other.step).abs() <= 1e-9 * self.step.max(other.step)
    }

    /// Index of the node at `x`, if `x` lies on the grid lattice.
    pub(crate) fn node_index(&self, x: f64) -> Option<usize> {
        let t = (x - self.lo) / self.step;
        let r = t.round();
        if (t - r).abs() < 1e-6 && r >= 0.0 && (r as usize) < self.n_points {
            Some(r as usize)
        } else {
            None
        }
    }
}

/// Nonnegative density tabulated on a [`Grid`], normalized to unit trapezoid mass.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    grid: Grid,
    values: Vec<f64>,
    total_mass: f64,
    discarded_mass: f64,
}

impl GridDensity {
    /// Normalizes `values` to unit mass. Tiny negative values (FFT round-off) are clamped.
    pub fn from_values(grid: Grid, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::InvalidGrid(format!(
                "{} values for {} grid points",
                values.len(),
                grid.n_points()
            )));
        }
        let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for v in values.iter_mut() {
            if !v.is_finite() {
                return Err(Error::NonFinite("density value".into()));
            }
            if *v < 0.0 {
                if *v < -1e-9 * peak.max(1e-300) {
                    return Err(Error::FamilySpec(format!("negative density value {v}")));
                }
                *v = 0.0;
            }
        }
        let mass = quad::trapezoid(&values, grid.step());
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::NonFinite(format!("density mass {mass}")));
        }
        values.iter_mut().for_each(|v| *v /= mass);
        Ok(Self {
            grid,
            values,
            total_mass: 1.0,
            discarded_mass: 0.0,
        })
    }

    pub(crate) fn with_discarded(mut self, discarded: f64) -> Self {
        self.discarded_mass = discarded;
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Mass cut off by cropping during construction (before renormalization).
    pub fn discarded_mass(&self) -> f64 {
        self.discarded_mass
    }

    /// Cubic (4-point Lagrange) interpolation, zero outside the grid, clamped at 0.
    pub fn eval(&self, x: f64) -> f64 {
        let g = &self.grid;
        let t = (x - g.lo()) / g.step();
        if !(t >= -1.0 && t <= g.n_points() as f64) {
            return 0.0;
        }
        let j = t.floor();
        let w = lagrange4(t - j);
        let j = j as isize;
        let mut acc = 0.0;
        for (o, wk) in w.iter().enumerate() {
            acc += wk * self.at(j - 1 + o as isize);
        }
        acc.max(0.0)
    }

    #[inline]
    pub(crate) fn at(&self, i: isize) -> f64 {
        if i < 0 || i as usize >= self.values.len() {
            0.0
        } else {
            self.values[i as usize]
        }
    }

    pub fn mean(&self) -> f64 {
        let g = &self.grid;
        quad::trapezoid_fn(self.values.len(), g.step(), |i| g.x(i) * self.values[i])
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let g = &self.grid;
        quad::trapezoid_fn(self.values.len(), g.step(), |i| {
            let d = g.x(i) - m;
            d * d * self.values[i]
        })
    }

    /// Trapezoid integral of `f(x) p(x)`.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        let g = &self.grid;
        quad::trapezoid_fn(self.values.len(), g.step(), |i| f(g.x(i)) * self.values[i])
    }

    /// Copy restricted to the nodes inside `[lo, hi]`, renormalized.
    pub fn crop(&self, lo: f64, hi: f64) -> Result<Self> {
        let g = &self.grid;
        let eps = 1e-9 * g.step();
        let i0 = (0..g.n_points()).find(|&i| g.x(i) >= lo - eps);
        let i1 = (0..g.n_points()).rev().find(|&i| g.x(i) <= hi + eps);
        let (i0, i1) = match (i0, i1) {
            (Some(a), Some(b)) if b > a => (a, b),
            _ => return Err(Error::InvalidGrid(format!("crop [{lo}, {hi}] is empty"))),
        };
        let kept = quad::trapezoid(&self.values[i0..=i1], g.step());
        let discarded = (self.total_mass - kept).max(0.0) + self.discarded_mass;
        let grid = Grid::from_step(g.x(i0), g.step(), i1 - i0 + 1);
        Ok(Self::from_values(grid, self.values[i0..=i1].to_vec())?.with_discarded(discarded))
    }

    /// Keeps every `factor`-th node, aligned so that `x = 0` stays a node when present.
    pub(crate) fn decimate(&self, factor: usize) -> Result<Self> {
        if factor == 1 {
            return Ok(self.clone());
        }
        let g = &self.grid;
        let start = g
            .node_index(0.0)
            .map(|z| z % factor)
            .unwrap_or(0);
        let vals: Vec<f64> = self.values[start..].iter().step_by(factor).copied().collect();
        if vals.len() < 2 {
            return Err(Error::GridExhausted("decimation left fewer than 2 nodes".into()));
        }
        let grid = Grid::from_step(g.x(start), g.step() * factor as f64, vals.len());
        Ok(Self::from_values(grid, vals)?.with_discarded(self.discarded_mass))
    }
}

/// Weights of the 4-point Lagrange interpolant at nodes -1, 0, 1, 2 for offset `t` in [0, 1).
#[inline]
pub(crate) fn lagrange4(t: f64) -> [f64; 4] {
    let tm1 = t - 1.0;
    let tm2 = t - 2.0;
    let tp1 = t + 1.0;
    [
        -t * tm1 * tm2 / 6.0,
        tp1 * tm1 * tm2 / 2.0,
        -tp1 * t * tm2 / 2.0,
        tp1 * t * tm1 / 6.0,
    ]
}
