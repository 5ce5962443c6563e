use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::coupling::ladder::{active_in_block, GridPolicy, Ladder};
use crate::dist::{FamilySpec1D, Kind, ProductFamily};
use crate::error::{Error, Result};
use crate::numerics::{
    conditional_diff_quantile, gaussian_cdf, gaussian_sf, ConditionalScratch, TailProb,
};
use crate::rng::stream;

pub const MAX_DEPTH: u32 = 14;
pub const MAX_DIM: usize = 8;

/// Inversion tolerance used unless configured otherwise.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

/// Everything needed to run one coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Tree depth `N`; the walk has `2^N` steps.
    pub depth: u32,
    pub family: ProductFamily,
    #[serde(default)]
    pub grid: GridPolicy,
    /// Per-transform quantile tolerance. A Gaussian target should come back
    /// with `delta <= 2^N * 5 * tolerance`.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub seed: u64,
}

impl EngineConfig {
    pub fn new(depth: u32, family: ProductFamily) -> Self {
        Self {
            depth,
            family,
            grid: GridPolicy::default(),
            tolerance: DEFAULT_TOLERANCE,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn dim(&self) -> usize {
        self.family.dim()
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_DEPTH).contains(&self.depth) {
            return Err(Error::Config(format!(
                "depth must be in 1..={MAX_DEPTH}, got {}",
                self.depth
            )));
        }
        let d = self.family.dim();
        if !(1..=MAX_DIM).contains(&d) {
            return Err(Error::Config(format!("dimension must be in 1..={MAX_DIM}, got {d}")));
        }
        for c in &self.family.coords {
            c.validate()?;
            if let Kind::PolyGaussian { d_param, .. } = c.kind {
                if d > 1 || d_param > 1 {
                    return Err(Error::Config(
                        "the polynomial-Gaussian law is not a product law in dimension >= 2; \
                         the engine accepts it only with d = 1 and d_param = 1"
                            .into(),
                    ));
                }
            }
        }
        if !self.family.is_standard(1e-8) {
            return Err(Error::Config(
                "family must be standardized (mean 0, unit variance per coordinate)".into(),
            ));
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1e-2) {
            return Err(Error::Config(format!("tolerance {} out of range", self.tolerance)));
        }
        self.grid.validate()
    }

    /// `2^N * 5 * tolerance`.
    pub fn gaussian_delta_bound(&self) -> f64 {
        (1u64 << self.depth) as f64 * 5.0 * self.tolerance
    }
}

/// The Gaussian walk and its block tree.
///
/// Arrays are row-major with `d` columns. `v[n]` holds `V_{n,k}`, `v_diff[n]`
/// holds `Vtilde_{n,k} = V_{n-1,2k} - V_{n-1,2k+1}` (`v_diff[0]` is empty).
#[derive(Debug, Clone)]
pub struct GaussianSide {
    pub y: Vec<f64>,
    pub partial: Vec<f64>,
    pub v: Vec<Vec<f64>>,
    pub v_diff: Vec<Vec<f64>>,
}

/// Result of one coupling run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingOutput {
    pub depth: u32,
    pub d: usize,
    /// `2^N x d`, row-major.
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `max_j |S_r^(j) - T_r^(j)|` for `r = 1..=2^N`.
    pub disc_path: Vec<f64>,
    pub delta: f64,
    /// Conditionals whose normalizer underflowed and were replaced by the Gaussian conditional.
    pub underflow_flags: u64,
    /// Top-level inversions whose cdf residual exceeded the tolerance.
    pub tolerance_flags: u64,
    /// `blocks[n]` holds the block sums `U_{n,k}` as produced during construction.
    #[serde(skip)]
    pub blocks: Vec<Vec<f64>>,
}

impl CouplingOutput {
    pub fn len(&self) -> usize {
        1usize << self.depth
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x_row(&self, k: usize) -> &[f64] {
        &self.x[k * self.d..(k + 1) * self.d]
    }

    pub fn y_row(&self, k: usize) -> &[f64] {
        &self.y[k * self.d..(k + 1) * self.d]
    }
}

/// Componentwise running sums and the max-norm discrepancy path of two walks.
pub fn discrepancy_path(x: &[f64], y: &[f64], d: usize) -> Vec<f64> {
    let mut s = vec![0.0; d];
    let mut t = vec![0.0; d];
    x.chunks_exact(d)
        .zip(y.chunks_exact(d))
        .map(|(xr, yr)| {
            let mut worst = 0.0f64;
            for j in 0..d {
                s[j] += xr[j];
                t[j] += yr[j];
                worst = worst.max((s[j] - t[j]).abs());
            }
            worst
        })
        .collect()
}

/// Precomputed coupling engine: block densities for every coordinate,
/// shared read-only across runs.
#[derive(Debug, Clone)]
pub struct Engine {
    config: EngineConfig,
    active: u64,
    ladders: Vec<Arc<Ladder>>,
}

impl Engine {
    pub fn new(config: EngineConfig) -> Result<Self> {
        let active = 1u64 << config.depth.min(63);
        Self::with_active(config, active)
    }

    /// Engine whose first `active` summands follow the target and the rest
    /// are standard Gaussian padding.
    pub fn with_active(config: EngineConfig, active: u64) -> Result<Self> {
        config.validate()?;
        let total = 1u64 << config.depth;
        if active == 0 || active > total {
            return Err(Error::Config(format!("active count {active} outside 1..={total}")));
        }
        let mut built: Vec<(FamilySpec1D, Arc<Ladder>)> = Vec::new();
        let mut ladders = Vec::with_capacity(config.dim());
        for spec in &config.family.coords {
            let ladder = match built.iter().find(|(s, _)| s == spec) {
                Some((_, l)) => l.clone(),
                None => {
                    let l = Arc::new(Ladder::build(spec, config.depth, active, &config.grid)?);
                    built.push((spec.clone(), l.clone()));
                    l
                }
            };
            ladders.push(ladder);
        }
        Ok(Self {
            config,
            active,
            ladders,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.config.dim()
    }

    pub fn depth(&self) -> u32 {
        self.config.depth
    }

    /// Draws `Y_1..Y_{2^N}` i.i.d. `N(0, I_d)` and builds the block sums and differences.
    pub fn draw_gaussian_side<R: Rng + ?Sized>(&self, rng: &mut R) -> GaussianSide {
        let d = self.dim();
        let n_steps = 1usize << self.depth();
        let y: Vec<f64> = (0..n_steps * d).map(|_| rng.sample(StandardNormal)).collect();
        let mut partial = Vec::with_capacity(y.len());
        let mut acc = vec![0.0; d];
        for row in y.chunks_exact(d) {
            for j in 0..d {
                acc[j] += row[j];
            }
            partial.extend_from_slice(&acc);
        }
        let mut v = vec![y.clone()];
        let mut v_diff = vec![Vec::new()];
        for n in 1..=self.depth() as usize {
            let prev = &v[n - 1];
            let count = prev.len() / d / 2;
            let mut s = Vec::with_capacity(count * d);
            let mut t = Vec::with_capacity(count * d);
            for k in 0..count {
                for j in 0..d {
                    let (a, b) = (prev[2 * k * d + j], prev[(2 * k + 1) * d + j]);
                    s.push(a + b);
                    t.push(a - b);
                }
            }
            v.push(s);
            v_diff.push(t);
        }
        GaussianSide {
            y,
            partial,
            v,
            v_diff,
        }
    }

    /// `U^(j) = F_j^{-1}(Phi_{2^{N/2}}(V^(j)))` for each coordinate of the total.
    ///
    /// Returns the transformed vector and the number of tolerance breaches.
    pub fn top_transform(&self, v_top: &[f64]) -> (Vec<f64>, u64) {
        let sigma = (2f64).powf(self.depth() as f64 / 2.0);
        let tol = self.config.tolerance;
        let mut flags = 0;
        let u = v_top
            .iter()
            .zip(&self.ladders)
            .map(|(&v, ladder)| {
                let prob = TailProb::from_pair(gaussian_cdf(v, sigma), gaussian_sf(v, sigma));
                let cdf = ladder.top();
                let x = cdf.quantile(prob);
                let residual = match prob {
                    TailProb::Lower(p) => (cdf.eval(x) - p).abs(),
                    TailProb::Upper(p) => (cdf.eval_upper(x) - p).abs(),
                };
                if residual > tol {
                    flags += 1;
                }
                x
            })
            .collect();
        (u, flags)
    }

    /// Splits block `(n, k)` with sum `u` into its two children, using the
    /// Gaussian difference `v_diff`. Returns `(left, right, underflow_count)`.
    pub fn level_transform(
        &self,
        n: u32,
        k: u64,
        u: &[f64],
        v_diff: &[f64],
        scratch: &mut ConditionalScratch,
    ) -> Result<(Vec<f64>, Vec<f64>, u64)> {
        let d = self.dim();
        let mut left = vec![0.0; d];
        let mut right = vec![0.0; d];
        let flags = self.split_into(n, k, u, v_diff, &mut left, &mut right, scratch)?;
        Ok((left, right, flags))
    }

    #[allow(clippy::too_many_arguments)]
    fn split_into(
        &self,
        n: u32,
        k: u64,
        u: &[f64],
        v_diff: &[f64],
        left: &mut [f64],
        right: &mut [f64],
        scratch: &mut ConditionalScratch,
    ) -> Result<u64> {
        if n == 0 || n > self.depth() {
            return Err(Error::Domain(format!("level {n} outside 1..={}", self.depth())));
        }
        let sigma = (2f64).powf(n as f64 / 2.0);
        let t_left = active_in_block(n - 1, 2 * k, self.active);
        let t_right = active_in_block(n - 1, 2 * k + 1, self.active);
        // both children have variance 2^(n-1): the difference given the sum has
        // a-variable centre s/2 and spread sigma_child / sqrt(2)
        let spread = self.config.grid.window_sigmas * (2f64).powf((n as f64 - 2.0) / 2.0);
        let mut flags = 0;
        for j in 0..u.len() {
            let ladder = &self.ladders[j];
            let p = ladder.density(n - 1, t_left);
            let q = ladder.density(n - 1, t_right);
            let s = u[j];
            let vt = v_diff[j];
            let prob = TailProb::from_pair(gaussian_cdf(vt, sigma), gaussian_sf(vt, sigma));
            let centre = 0.5 * s;
            let ut = match conditional_diff_quantile(
                p,
                q,
                s,
                prob,
                Some((centre - spread, centre + spread)),
                scratch,
            ) {
                Ok(w) => w,
                Err(Error::ConditioningUnderflow { .. }) => {
                    // the Gaussian conditional N(0, 2^n) maps Vtilde to itself
                    flags += 1;
                    vt
                }
                Err(e) => return Err(e),
            };
            let l = 0.5 * (s + ut);
            left[j] = l;
            right[j] = s - l;
        }
        Ok(flags)
    }

    /// Full top-down pass driven by `rng`.
    pub fn run<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<CouplingOutput> {
        let side = self.draw_gaussian_side(rng);
        self.couple(side)
    }

    /// Run number `index` of the family of runs keyed by `master_seed`.
    pub fn run_replicate(&self, master_seed: u64, index: u64) -> Result<CouplingOutput> {
        self.run(&mut stream(master_seed, index))
    }

    fn couple(&self, side: GaussianSide) -> Result<CouplingOutput> {
        let depth = self.depth();
        let d = self.dim();
        let mut blocks: Vec<Vec<f64>> = vec![Vec::new(); depth as usize + 1];
        let (top, tolerance_flags) = self.top_transform(&side.v[depth as usize]);
        blocks[depth as usize] = top;
        let mut scratch = ConditionalScratch::new();
        let mut underflow_flags = 0;
        for n in (1..=depth).rev() {
            let parent = &blocks[n as usize];
            let count = parent.len() / d;
            let mut child = vec![0.0; 2 * count * d];
            let vd = &side.v_diff[n as usize];
            for k in 0..count {
                let (l, r) = child[2 * k * d..(2 * k + 2) * d].split_at_mut(d);
                underflow_flags += self.split_into(
                    n,
                    k as u64,
                    &parent[k * d..(k + 1) * d],
                    &vd[k * d..(k + 1) * d],
                    l,
                    r,
                    &mut scratch,
                )?;
            }
            blocks[n as usize - 1] = child;
        }
        let x = blocks[0].clone();
        let disc_path = discrepancy_path(&x, &side.y, d);
        let delta = disc_path.iter().copied().fold(0.0, f64::max);
        if !delta.is_finite() {
            return Err(Error::NonFinite("coupling discrepancy".into()));
        }
        Ok(CouplingOutput {
            depth,
            d,
            x,
            y: side.y,
            disc_path,
            delta,
            underflow_flags,
            tolerance_flags,
            blocks,
        })
    }
}

/// Builds the engine for `config` and runs it once with stream 0 of `config.seed`.
pub fn run_coupling(config: &EngineConfig) -> Result<CouplingOutput> {
    Engine::new(config.clone())?.run_replicate(config.seed, 0)
}
