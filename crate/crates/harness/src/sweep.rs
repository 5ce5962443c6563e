//! Replicated coupling runs over a grid of `tau` and depth values.

use std::time::Instant;

use kmtc_core::coupling::Engine;
use kmtc_core::diagnostics::estimate_tau;
use kmtc_core::dist::Kind;
use kmtc_core::stats::{linear_fit, mean, quantile_sorted};
use rayon::prelude::*;
use rayon::ThreadPool;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{fmt_f64, fmt_opt, Table};
use crate::Result;

/// Exponential-moment multipliers, applied to `delta / (d^{3/2} tau)`.
pub const LAMBDAS: [f64; 5] = [0.1, 0.2, 0.5, 1.0, 2.0];

/// Share of the largest replicates used for the tail fit.
pub const TAIL_FRACTION: f64 = 0.2;

/// The tail fit needs this many replicates.
pub const MIN_TAIL_REPLICATES: usize = 100;

/// A moment estimate is saturated when one replicate carries this share of it.
pub const SATURATION_SHARE: f64 = 0.1;

/// `log E exp(lambda delta / (d^{3/2} tau))` from the replicates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub lambda: f64,
    pub log_moment: f64,
    /// Fraction of the sample mean contributed by the largest replicate.
    pub top_share: f64,
    pub saturated: bool,
}

/// Least-squares fit of `log P{delta >= x} = -c2 x / (d^{3/2} tau) + c3 log*d log*n`
/// over the upper tail of the sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailFit {
    pub c2: f64,
    pub c3: f64,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    /// Normalizing `tau`: the poly_gaussian parameter, else the class estimate.
    pub tau: f64,
    pub tau_source: &'static str,
    pub depth: u32,
    pub d: usize,
    pub replicates: u64,
    pub gaussian_bound: f64,
    pub min: f64,
    pub q10: f64,
    pub q25: f64,
    pub median: f64,
    pub mean: f64,
    pub q75: f64,
    pub q90: f64,
    pub max: f64,
    pub moments: Vec<MomentEstimate>,
    pub tail: Option<TailFit>,
    pub notes: Vec<String>,
    pub underflow_flags: u64,
    pub tolerance_flags: u64,
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    /// `deltas[row][replicate]`.
    pub deltas: Vec<Vec<f64>>,
    pub wall_seconds: Vec<f64>,
}

/// `max(1, ln b)`.
fn log_star(b: f64) -> f64 {
    b.ln().max(1.0)
}

/// Runs `config.replicates` couplings for every `(tau, depth)` pair. Replicate
/// `i` of every row uses stream `i` of the master seed, so rows at different
/// `tau` are paired.
pub fn run_sweep(config: &RunConfig, pool: &ThreadPool) -> Result<Sweep> {
    config.validate()?;
    let taus: Vec<Option<f64>> = if config.taus.is_empty() {
        vec![None]
    } else {
        config.taus.iter().map(|&t| Some(t)).collect()
    };
    let mut sweep = Sweep { rows: Vec::new(), deltas: Vec::new(), wall_seconds: Vec::new() };
    for tau in taus {
        let (tau_norm, source) = normalizing_tau(config, tau, pool)?;
        for &depth in &config.depths {
            let start = Instant::now();
            let engine = Engine::new(config.engine_config(depth, tau)?)?;
            let runs = pool.install(|| {
                (0..config.replicates)
                    .into_par_iter()
                    .map(|i| engine.run_replicate(config.seed, i))
                    .map(|r| r.map(|o| (o.delta, o.underflow_flags, o.tolerance_flags)))
                    .collect::<kmtc_core::Result<Vec<_>>>()
            })?;
            let deltas: Vec<f64> = runs.iter().map(|r| r.0).collect();
            let mut row = summarize(&deltas, tau_norm, depth, config.d);
            row.tau_source = source;
            row.gaussian_bound = engine.config().gaussian_delta_bound();
            row.underflow_flags = runs.iter().map(|r| r.1).sum();
            row.tolerance_flags = runs.iter().map(|r| r.2).sum();
            sweep.rows.push(row);
            sweep.deltas.push(deltas);
            sweep.wall_seconds.push(start.elapsed().as_secs_f64());
        }
    }
    Ok(sweep)
}

fn normalizing_tau(config: &RunConfig, tau: Option<f64>, pool: &ThreadPool) -> Result<(f64, &'static str)> {
    let f = config.family_with_tau(tau);
    if let Kind::PolyGaussian { tau, .. } = f.kind {
        return Ok((tau, "parameter"));
    }
    let law = config.coordinate_law(None)?;
    let report = pool.install(|| estimate_tau(&law, config.check.z_radius))?;
    Ok((report.tau_hat, "estimate"))
}

/// Quantiles, moments and the tail fit of one row's discrepancies.
pub fn summarize(deltas: &[f64], tau: f64, depth: u32, d: usize) -> SweepRow {
    let mut sorted = deltas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p| quantile_sorted(&sorted, p);
    let scale = (d as f64).powf(1.5) * tau;
    let mut notes = Vec::new();
    let moments = if tau > 0.0 {
        LAMBDAS.iter().map(|&l| moment(&sorted, l, scale)).collect()
    } else {
        notes.push("tau = 0: moments and tail fit skipped".into());
        Vec::new()
    };
    let tail = if tau > 0.0 {
        match tail_fit(&sorted, scale, d, depth) {
            Ok(t) => Some(t),
            Err(msg) => {
                notes.push(msg);
                None
            }
        }
    } else {
        None
    };
    SweepRow {
        tau,
        tau_source: "parameter",
        depth,
        d,
        replicates: deltas.len() as u64,
        gaussian_bound: 0.0,
        min: sorted[0],
        q10: q(0.1),
        q25: q(0.25),
        median: q(0.5),
        mean: mean(&sorted),
        q75: q(0.75),
        q90: q(0.9),
        max: sorted[sorted.len() - 1],
        moments,
        tail,
        notes,
        underflow_flags: 0,
        tolerance_flags: 0,
    }
}

/// Log of the sample mean of `exp(lambda * delta / scale)`, computed stably.
fn moment(sorted: &[f64], lambda: f64, scale: f64) -> MomentEstimate {
    let k = lambda / scale;
    let top = k * sorted[sorted.len() - 1];
    let sum: f64 = sorted.iter().map(|&x| (k * x - top).exp()).sum();
    let top_share = 1.0 / sum;
    MomentEstimate {
        lambda,
        log_moment: top + sum.ln() - (sorted.len() as f64).ln(),
        top_share,
        saturated: top_share >= SATURATION_SHARE,
    }
}

fn tail_fit(sorted: &[f64], scale: f64, d: usize, depth: u32) -> std::result::Result<TailFit, String> {
    let n = sorted.len();
    if n < MIN_TAIL_REPLICATES {
        return Err(format!("tail fit needs {MIN_TAIL_REPLICATES} replicates, have {n}"));
    }
    let start = ((1.0 - TAIL_FRACTION) * n as f64).floor() as usize;
    // empirical P{delta >= x} at each order statistic of the upper tail
    let x: Vec<f64> = sorted[start..].to_vec();
    let y: Vec<f64> = (start..n).map(|i| ((n - i) as f64 / n as f64).ln()).collect();
    let fit = linear_fit(&x, &y).map_err(|e| format!("tail fit: {e}"))?;
    let log_term = log_star(d as f64) * log_star((1u64 << depth) as f64);
    Ok(TailFit {
        c2: -fit.slope * scale,
        c3: fit.intercept / log_term,
        slope: fit.slope,
        intercept: fit.intercept,
        r2: fit.r2,
        points: x.len(),
    })
}

impl Sweep {
    pub fn table(&self) -> Table {
        let mut header: Vec<String> = [
            "tau", "tau_source", "depth", "d", "replicates", "gaussian_bound", "min", "q10", "q25", "median",
            "mean", "q75", "q90", "max",
        ]
        .map(String::from)
        .to_vec();
        for l in LAMBDAS {
            header.push(format!("log_moment_{l}"));
            header.push(format!("saturated_{l}"));
        }
        header.extend(["c2", "c3", "tail_r2", "underflow_flags", "tolerance_flags"].map(String::from));
        let mut t = Table::new(header);
        for r in &self.rows {
            let mut row = vec![
                fmt_f64(r.tau),
                r.tau_source.to_string(),
                r.depth.to_string(),
                r.d.to_string(),
                r.replicates.to_string(),
            ];
            row.extend(
                [r.gaussian_bound, r.min, r.q10, r.q25, r.median, r.mean, r.q75, r.q90, r.max].map(fmt_f64),
            );
            for (i, _) in LAMBDAS.iter().enumerate() {
                match r.moments.get(i) {
                    Some(m) => {
                        row.push(fmt_f64(m.log_moment));
                        row.push(m.saturated.to_string());
                    }
                    None => row.extend([String::new(), String::new()]),
                }
            }
            row.push(fmt_opt(r.tail.as_ref().map(|t| t.c2)));
            row.push(fmt_opt(r.tail.as_ref().map(|t| t.c3)));
            row.push(fmt_opt(r.tail.as_ref().map(|t| t.r2)));
            row.push(r.underflow_flags.to_string());
            row.push(r.tolerance_flags.to_string());
            t.push(row);
        }
        t
    }

    /// One row per replicate: `tau, depth, replicate, delta`.
    pub fn replicate_table(&self) -> Table {
        let mut t = Table::new(["tau", "depth", "replicate", "delta"]);
        for (r, ds) in self.rows.iter().zip(&self.deltas) {
            for (i, &x) in ds.iter().enumerate() {
                t.push(vec![fmt_f64(r.tau), r.depth.to_string(), i.to_string(), fmt_f64(x)]);
            }
        }
        t
    }
}
