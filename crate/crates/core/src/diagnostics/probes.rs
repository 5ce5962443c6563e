use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{ProbePoint, ProbeReport};
use crate::dist::{conjugate_parts, FamilySpec1D, GridSampler};
use crate::error::{Error, Result};
use crate::rng::stream;

/// Draws per RNG stream; chunk `c` uses `stream(seed, c)` so results do
/// not depend on how chunks are scheduled.
const CHUNK: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BernsteinSetup {
    pub reps: u64,
    pub x_points: usize,
    pub x_max_sigmas: f64,
    pub seed: u64,
}

impl Default for BernsteinSetup {
    fn default() -> Self {
        Self { reps: 1_000_000, x_points: 17, x_max_sigmas: 4.0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OttavianiSetup {
    pub n: usize,
    pub t_points: usize,
    /// Largest `t` in units of `sigma * sqrt(n)`.
    pub t_max: f64,
    pub reps: u64,
    pub seed: u64,
}

impl Default for OttavianiSetup {
    fn default() -> Self {
        Self { n: 64, t_points: 10, t_max: 1.2, reps: 100_000, seed: 0 }
    }
}

enum Law {
    Exact(FamilySpec1D),
    Grid(GridSampler),
}

impl Law {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Law::Exact(f) => f.sample(rng),
            Law::Grid(s) => s.sample(rng),
        }
    }
}

fn chunks(reps: u64) -> Vec<(u64, u64)> {
    (0..reps.div_ceil(CHUNK))
        .map(|c| (c, CHUNK.min(reps - c * CHUNK)))
        .collect()
}

fn merge(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
    a
}

/// Number of entries of the ascending `grid` strictly below `v`.
fn rank(grid: &[f64], v: f64) -> usize {
    grid.partition_point(|&x| x < v)
}

/// Empirical `P{|xi - E xi| >= x}` for the conjugate law of `family` at `h`
/// against `2 max{exp(-x^2/(4 sigma^2)), exp(-x/(4 tau))}` on
/// `x in [0, x_max_sigmas * sigma]`, allowing 3 binomial standard errors.
pub fn bernstein_probe(family: &FamilySpec1D, h: f64, tau: f64, setup: &BernsteinSetup) -> Result<ProbeReport> {
    if setup.reps == 0 || setup.x_points < 2 || tau < 0.0 {
        return Err(Error::Config("bernstein probe needs reps >= 1, x_points >= 2, tau >= 0".into()));
    }
    let (law, mean, var) = if h == 0.0 {
        let (m, v) = family.moments();
        (Law::Exact(family.clone()), m, v)
    } else {
        // sampled about the location offset, so huge tilts keep their resolution
        let (_, p) = conjugate_parts(family, h, 64.0)?;
        (Law::Grid(GridSampler::new(&p)), p.mean(), p.variance())
    };
    let sigma = var.sqrt();
    let bound = |x: f64| {
        let sub_gauss = (-x * x / (4.0 * var)).exp();
        let sub_exp = if tau > 0.0 { (-x / (4.0 * tau)).exp() } else { 0.0 };
        2.0 * sub_gauss.max(sub_exp)
    };
    let xs: Vec<f64> = (0..setup.x_points)
        .map(|i| setup.x_max_sigmas * sigma * i as f64 / (setup.x_points - 1) as f64)
        .collect();
    let x_max = *xs.last().unwrap();
    if (setup.reps as f64) * bound(x_max).min(1.0) < 10.0 {
        return Err(Error::Insufficient(format!(
            "{} replicates cannot resolve tail probabilities near {:.2e} at x = {x_max:.3}",
            setup.reps,
            bound(x_max)
        )));
    }
    // hist[k] counts draws with |xi| in [x_k, x_{k+1})
    let hist = chunks(setup.reps)
        .into_par_iter()
        .map(|(c, len)| {
            let mut rng = stream(setup.seed, c);
            let mut hist = vec![0u64; xs.len() + 1];
            for _ in 0..len {
                let a = (law.draw(&mut rng) - mean).abs();
                // number of grid points x_k <= a
                hist[xs.partition_point(|&x| x <= a)] += 1;
            }
            hist
        })
        .reduce(|| vec![0u64; xs.len() + 1], merge);
    let n = setup.reps as f64;
    let mut above = 0u64;
    let mut tail = vec![0.0; xs.len()];
    for k in (0..xs.len()).rev() {
        above += hist[k + 1];
        tail[k] = above as f64 / n;
    }
    let points = xs
        .iter()
        .zip(&tail)
        .map(|(&x, &p)| {
            let se = (p * (1.0 - p) / n).sqrt();
            ProbePoint::new(format!("x={:.4}", x / sigma), x, p, bound(x), 3.0 * se)
        })
        .collect();
    Ok(ProbeReport::from_points("bernstein", points)
        .fit("tau", tau)
        .fit("h", h)
        .fit("sigma", sigma))
}

/// Empirical `P{max_k |S_k| > 3t}` against `3 max_k P{|S_k| > t}` for a walk of
/// `n` centred steps from `family`, allowing 3 combined standard errors.
pub fn ottaviani_probe(family: &FamilySpec1D, setup: &OttavianiSetup) -> Result<ProbeReport> {
    if setup.n == 0 || setup.t_points < 2 || setup.reps == 0 {
        return Err(Error::Config("ottaviani probe needs n >= 1, t_points >= 2, reps >= 1".into()));
    }
    let (mean, var) = family.moments();
    let scale = (var * setup.n as f64).sqrt();
    let ts: Vec<f64> = (0..setup.t_points)
        .map(|i| setup.t_max * scale * i as f64 / (setup.t_points - 1) as f64)
        .collect();
    let three_t: Vec<f64> = ts.iter().map(|t| 3.0 * t).collect();
    let width = ts.len() + 1;
    // layout: [max histogram | per-k histograms]
    let counts = chunks(setup.reps)
        .into_par_iter()
        .map(|(c, len)| {
            let mut rng = stream(setup.seed, c);
            let mut h = vec![0u64; width * (setup.n + 1)];
            for _ in 0..len {
                let mut s = 0.0f64;
                let mut m = 0.0f64;
                for k in 0..setup.n {
                    s += family.sample(&mut rng) - mean;
                    let a = s.abs();
                    m = m.max(a);
                    h[width * (k + 1) + rank(&ts, a)] += 1;
                }
                h[rank(&three_t, m)] += 1;
            }
            h
        })
        .reduce(|| vec![0u64; width * (setup.n + 1)], merge);
    let n = setup.reps as f64;
    // P{value > t_i} = share of draws whose rank exceeds i
    let exceed = |block: usize, i: usize| -> f64 {
        counts[width * block + i + 1..width * (block + 1)].iter().sum::<u64>() as f64 / n
    };
    let points = ts
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let left = exceed(0, i);
            let right = (1..=setup.n).map(|k| exceed(k, i)).fold(0.0, f64::max);
            let var_l = left * (1.0 - left) / n;
            let var_r = right * (1.0 - right) / n;
            let slack = 3.0 * (var_l + 9.0 * var_r).sqrt();
            ProbePoint::new(format!("t={:.4}", t / scale), t, left, 3.0 * right, slack)
        })
        .collect();
    Ok(ProbeReport::from_points("ottaviani", points).fit("n", setup.n as f64))
}
