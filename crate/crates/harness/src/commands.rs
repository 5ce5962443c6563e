//! The `kmtc` subcommands. Each writes its files under `config.out` and
//! returns what it wrote in structured form.

use std::fmt::Write as _;
use std::time::Instant;

use kmtc_core::coupling::{compose_chain, run_coupling, ChainBlock};
use kmtc_core::diagnostics::{
    bernstein_probe, check_smoothness_integrals, estimate_tau, ottaviani_probe, polygauss_cf_check,
    sandwich_probe, ClassReport, ProbeReport,
};
use kmtc_core::dist::{FamilySpec1D, Kind, ProductFamily};
use kmtc_core::dyadic::{decompose, BlockTree, Decomposition};
use kmtc_core::rng::stream;
use kmtc_core::stats::{linear_fit, LinearFit};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::ThreadPool;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{fmt_f64, write_json, write_table, Table};
use crate::sweep::{run_sweep, Sweep};
use crate::{HarnessError, Result};

/// Column names `X_1..X_d, Y_1..Y_d`.
fn walk_columns(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("X_{j}")).chain((1..=d).map(|j| format!("Y_{j}"))).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CoupleSummary {
    pub seed: u64,
    #[serde(rename = "N")]
    pub depth: u32,
    pub d: usize,
    pub family: String,
    pub delta: f64,
    /// `2^N * 5 * tolerance`, what a Gaussian target should stay under.
    pub gaussian_bound: f64,
    pub underflow_flags: u64,
    pub tolerance_flags: u64,
}

/// One coupling: `couple.csv` with the walk and discrepancy path, and `couple.json`.
pub fn cmd_couple(config: &RunConfig) -> Result<CoupleSummary> {
    config.validate()?;
    let engine_cfg = config.engine_config(config.depth, None)?;
    let out = run_coupling(&engine_cfg)?;
    let d = out.d;
    let mut t = Table::new(std::iter::once("k".to_string()).chain(walk_columns(d)).chain(["disc".to_string()]));
    for k in 0..out.len() {
        let mut row = vec![(k + 1).to_string()];
        row.extend(out.x_row(k).iter().chain(out.y_row(k)).map(|&v| fmt_f64(v)));
        row.push(fmt_f64(out.disc_path[k]));
        t.push(row);
    }
    write_table(&config.out, "couple", &t, "couple", config)?;
    let summary = CoupleSummary {
        seed: config.seed,
        depth: out.depth,
        d,
        family: config.coordinate_law(None)?.to_string(),
        delta: out.delta,
        gaussian_bound: engine_cfg.gaussian_delta_bound(),
        underflow_flags: out.underflow_flags,
        tolerance_flags: out.tolerance_flags,
    };
    write_json(&config.out, "couple", &summary)?;
    Ok(summary)
}

#[derive(Serialize)]
struct Timing<'a> {
    rows: Vec<TimingRow>,
    total_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<&'a str>,
}

#[derive(Serialize)]
struct TimingRow {
    tau: f64,
    depth: u32,
    seconds: f64,
}

fn write_sweep(config: &RunConfig, sweep: &Sweep, name: &str, command: &str) -> Result<()> {
    write_table(&config.out, name, &sweep.table(), command, config)?;
    write_table(&config.out, &format!("{name}_replicates"), &sweep.replicate_table(), command, config)?;
    write_json(&config.out, name, &sweep.rows)?;
    let timing = Timing {
        rows: sweep
            .rows
            .iter()
            .zip(&sweep.wall_seconds)
            .map(|(r, &s)| TimingRow { tau: r.tau, depth: r.depth, seconds: s })
            .collect(),
        total_seconds: sweep.wall_seconds.iter().sum(),
        note: Some("wall times vary between runs; kept apart from the deterministic outputs"),
    };
    write_json(&config.out, &format!("{name}_timing"), &timing)?;
    Ok(())
}

/// Monte Carlo sweep over `taus x depths`: `mc.csv`, `mc_replicates.csv`,
/// `mc.json` and `mc_timing.json`.
pub fn cmd_mc(config: &RunConfig, pool: &ThreadPool) -> Result<Sweep> {
    let sweep = run_sweep(config, pool)?;
    write_sweep(config, &sweep, "mc", "mc")?;
    Ok(sweep)
}

/// Median discrepancy against depth for one `tau`.
#[derive(Debug, Clone, Serialize)]
pub struct RateFit {
    pub tau: f64,
    /// `median ~ a + b N`, i.e. linear in `log n`.
    pub log_model: LinearFit,
    /// `median ~ a + b 2^{N/2}`, i.e. linear in `sqrt(n)`.
    pub sqrt_model: LinearFit,
    pub log_model_preferred: bool,
    /// `median / 2^{N/2}` at the smallest and largest depth.
    pub scaled_median_first: f64,
    pub scaled_median_last: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopeComparison {
    pub tau_low: f64,
    pub tau_high: f64,
    pub slope_difference: f64,
    pub standard_error: f64,
    /// Difference in units of its standard error.
    pub z: f64,
}

#[derive(Serialize)]
struct RateReport<'a> {
    fits: &'a [RateFit],
    comparisons: Vec<SlopeComparison>,
    note: &'static str,
}

pub const MIN_RATE_DEPTHS: usize = 4;

/// Sweep plus regressions of median discrepancy on `N` and on `2^{N/2}`:
/// `rate.csv`, `rate.json`, and the sweep files under `rate_sweep*`.
pub fn cmd_rate(config: &RunConfig, pool: &ThreadPool) -> Result<Vec<RateFit>> {
    if config.depths.len() < MIN_RATE_DEPTHS {
        return Err(HarnessError::Config(format!(
            "rate needs at least {MIN_RATE_DEPTHS} depths, got {}",
            config.depths.len()
        )));
    }
    let sweep = run_sweep(config, pool)?;
    write_sweep(config, &sweep, "rate_sweep", "rate")?;
    let fits = rate_fits(&sweep)?;
    let mut t = Table::new(["tau", "model", "slope", "slope_se", "intercept", "r2"]);
    for f in &fits {
        for (model, m) in [("log_n", &f.log_model), ("sqrt_n", &f.sqrt_model)] {
            t.push(vec![
                fmt_f64(f.tau),
                model.into(),
                fmt_f64(m.slope),
                fmt_f64(m.slope_se),
                fmt_f64(m.intercept),
                fmt_f64(m.r2),
            ]);
        }
    }
    write_table(&config.out, "rate", &t, "rate", config)?;
    let mut by_tau: Vec<&RateFit> = fits.iter().collect();
    by_tau.sort_by(|a, b| a.tau.total_cmp(&b.tau));
    let comparisons = by_tau
        .windows(2)
        .map(|w| {
            let diff = w[1].log_model.slope - w[0].log_model.slope;
            let se = w[0].log_model.slope_se.hypot(w[1].log_model.slope_se);
            SlopeComparison { tau_low: w[0].tau, tau_high: w[1].tau, slope_difference: diff, standard_error: se, z: diff / se }
        })
        .collect();
    let report = RateReport {
        fits: &fits,
        comparisons,
        note: "plain log n template; log* factors are not separable at these sizes",
    };
    write_json(&config.out, "rate", &report)?;
    Ok(fits)
}

/// Groups sweep rows by `tau` (in sweep order) and fits both models.
pub fn rate_fits(sweep: &Sweep) -> Result<Vec<RateFit>> {
    let mut taus: Vec<f64> = Vec::new();
    for r in &sweep.rows {
        if !taus.contains(&r.tau) {
            taus.push(r.tau);
        }
    }
    taus.iter()
        .map(|&tau| {
            let rows: Vec<_> = sweep.rows.iter().filter(|r| r.tau == tau).collect();
            let n: Vec<f64> = rows.iter().map(|r| r.depth as f64).collect();
            let sqrt_n: Vec<f64> = rows.iter().map(|r| 2f64.powf(r.depth as f64 / 2.0)).collect();
            let med: Vec<f64> = rows.iter().map(|r| r.median).collect();
            let log_model = linear_fit(&n, &med)?;
            let sqrt_model = linear_fit(&sqrt_n, &med)?;
            let (first, last) = (rows[0], rows[rows.len() - 1]);
            Ok(RateFit {
                tau,
                log_model,
                sqrt_model,
                log_model_preferred: log_model.r2 > sqrt_model.r2,
                scaled_median_first: first.median / 2f64.powf(first.depth as f64 / 2.0),
                scaled_median_last: last.median / 2f64.powf(last.depth as f64 / 2.0),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct DecomposeOutput {
    pub decomposition: Decomposition,
    /// Relative error of the reconstruction on a random vector.
    pub reconstruction_error: f64,
    pub text: String,
}

/// Largest reconstruction error accepted before printing.
const RECONSTRUCTION_TOLERANCE: f64 = 1e-10;

/// Decomposes the prefix `config.prefix` of `2^config.depth` summands and
/// verifies it on a Gaussian vector from stream 0 of the seed.
pub fn cmd_decompose(config: &RunConfig) -> Result<DecomposeOutput> {
    config.validate()?;
    let (m, depth) = (config.prefix, config.depth);
    let dec = decompose(m, depth)?;
    let mut rng = stream(config.seed, 0);
    let x: Vec<f64> = (0..1u64 << depth).map(|_| rng.sample(StandardNormal)).collect();
    let tree = BlockTree::from_leaves(&x)?;
    let direct: f64 = x[..m as usize].iter().sum();
    let rebuilt = dec.reconstruct(tree.total(), |n, l| tree.diffs[n as usize][l as usize]);
    let scale: f64 = x.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    let err = (rebuilt - direct).abs() / scale;
    if !(err <= RECONSTRUCTION_TOLERANCE) {
        return Err(kmtc_core::Error::NonFinite(format!(
            "reconstruction of S_{m} off by {err:e} (relative)"
        ))
        .into());
    }
    let mut text = String::new();
    let _ = writeln!(text, "S_{m} with 2^{depth} summands:");
    let _ = writeln!(text, "  {dec}");
    let _ = writeln!(text, "global coefficient {}", fmt_f64(dec.global_coeff));
    let _ = writeln!(text, "{:>4} {:>10} {:>12}", "n", "l", "gamma");
    for term in &dec.terms {
        let _ = writeln!(text, "{:>4} {:>10} {:>12}", term.n, term.l, fmt_f64(term.gamma()));
    }
    let _ = writeln!(text, "reconstruction verified: relative error {err:.1e}");
    Ok(DecomposeOutput { decomposition: dec, reconstruction_error: err, text })
}

#[derive(Debug, Clone, Serialize)]
pub struct ComposeSummary {
    pub seed: u64,
    pub d: usize,
    pub family: String,
    pub stages: u32,
    pub summands: usize,
    pub delta: f64,
    pub block_delta_sum: f64,
    /// The chained discrepancy never exceeds the sum of the block discrepancies.
    pub within_block_sum: bool,
    pub blocks: Vec<ChainBlock>,
}

/// Chained couplings of blocks `m_s = 2^{2^s}`: `compose.csv` and `compose.json`.
pub fn cmd_compose(config: &RunConfig) -> Result<ComposeSummary> {
    config.validate()?;
    // depth is replaced per block by the chain
    let template = config.engine_config(1, None)?;
    let chain = compose_chain(&template, config.stages)?;
    let d = chain.d;
    let mut t = Table::new(
        ["k", "stage"].map(String::from).into_iter().chain(walk_columns(d)).chain(["disc".to_string()]),
    );
    let mut k = 0usize;
    for b in &chain.blocks {
        for _ in 0..b.size {
            let mut row = vec![(k + 1).to_string(), b.stage.to_string()];
            row.extend(
                chain.x[k * d..(k + 1) * d]
                    .iter()
                    .chain(&chain.y[k * d..(k + 1) * d])
                    .map(|&v| fmt_f64(v)),
            );
            row.push(fmt_f64(chain.disc_path[k]));
            t.push(row);
            k += 1;
        }
    }
    write_table(&config.out, "compose", &t, "compose", config)?;
    let block_delta_sum: f64 = chain.blocks.iter().map(|b| b.delta).sum();
    let summary = ComposeSummary {
        seed: config.seed,
        d,
        family: config.coordinate_law(None)?.to_string(),
        stages: config.stages,
        summands: chain.x.len() / d,
        delta: chain.delta,
        block_delta_sum,
        within_block_sum: chain.delta <= block_delta_sum * (1.0 + 1e-12),
        blocks: chain.blocks,
    };
    write_json(&config.out, "compose", &summary)?;
    Ok(summary)
}

/// The one-dimensional families the project ships, before standardization.
pub fn shipped_families() -> Vec<(&'static str, FamilySpec1D)> {
    let uniform = FamilySpec1D::uniform(1.0);
    let cosine = FamilySpec1D::raised_cosine(1.0);
    vec![
        ("gaussian", FamilySpec1D::standard_gaussian()),
        ("poly_gaussian_0.2", FamilySpec1D::poly_gaussian(0.2, 1)),
        ("poly_gaussian_0.5", FamilySpec1D::poly_gaussian(0.5, 1)),
        ("poly_gaussian_1", FamilySpec1D::poly_gaussian(1.0, 1)),
        ("poly_gaussian_0.5_d3", FamilySpec1D::poly_gaussian(0.5, 3)),
        ("smoothed_uniform", FamilySpec1D::smoothed_compact(uniform.clone(), 0.25)),
        ("smoothed_raised_cosine", FamilySpec1D::smoothed_compact(cosine.clone(), 0.25)),
        ("conv_power_uniform_2", FamilySpec1D::conv_power(uniform.clone(), 2)),
        ("conv_power_uniform_8", FamilySpec1D::conv_power(uniform.clone(), 8)),
        ("uniform", uniform),
        ("raised_cosine", cosine),
    ]
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckedReport {
    pub name: String,
    /// Failing a required probe fails the check; the rest are advisory.
    pub required: bool,
    pub report: ProbeReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub family: String,
    pub class: ClassReport,
    pub reports: Vec<CheckedReport>,
    pub pass: bool,
}

impl CheckOutcome {
    pub fn failures(&self) -> Vec<&str> {
        self.reports.iter().filter(|r| r.required && !r.report.pass).map(|r| r.name.as_str()).collect()
    }
}

/// Runs the class estimate and every probe on the configured family:
/// `check.csv` (one row per probe point) and `check.json`.
///
/// Required: Bernstein at `h in {0, +-0.5/tau_hat}`, Ottaviani, and the CF
/// bound for a raw one-dimensional poly_gaussian. Advisory: the smoothness
/// integrals (their constants only bite for small `tau`) and the sandwich
/// fit, which has no threshold.
pub fn cmd_check(config: &RunConfig, pool: &ThreadPool) -> Result<CheckOutcome> {
    config.validate()?;
    let law = config.coordinate_law(None)?;
    let c = &config.check;
    let class = pool.install(|| estimate_tau(&law, c.z_radius))?;
    let tau = class.tau_hat;
    let mut reports = Vec::new();
    let mut push = |name: String, required: bool, report: ProbeReport| {
        reports.push(CheckedReport { name, required, report });
    };

    let product = ProductFamily::iid(law.clone(), config.d)?;
    for &level in &c.smoothness_levels {
        for j in 1..=2 * config.d {
            let setup = kmtc_core::diagnostics::SmoothnessSetup { level, j, ..c.smoothness.clone() };
            // the block scheme asks for the condition at sqrt(2) tau
            let r = pool.install(|| check_smoothness_integrals(&product, std::f64::consts::SQRT_2 * tau, &setup))?;
            push(format!("smoothness n={level} j={j}"), false, r);
        }
    }

    let mut hs = vec![0.0];
    if tau > 0.0 {
        hs.extend([0.5 / tau, -0.5 / tau]);
    }
    let bern = kmtc_core::diagnostics::BernsteinSetup { seed: config.seed, ..c.bernstein.clone() };
    for h in hs {
        let r = pool.install(|| bernstein_probe(&law, h, tau, &bern))?;
        push(format!("bernstein h={h:.4}"), true, r);
    }

    let ott = kmtc_core::diagnostics::OttavianiSetup { seed: config.seed, ..c.ottaviani.clone() };
    let r = pool.install(|| ottaviani_probe(&law, &ott))?;
    push(format!("ottaviani n={}", ott.n), true, r);

    for &level in &c.sandwich_levels {
        let setup = kmtc_core::diagnostics::SandwichSetup { level, ..c.sandwich.clone() };
        let r = pool.install(|| sandwich_probe(&law, tau, &setup))?;
        push(format!("sandwich n={level}"), false, r);
    }

    if let Kind::PolyGaussian { tau: raw_tau, d_param: 1 } = config.family.kind {
        let hs: Vec<f64> = if raw_tau > 0.0 {
            c.cf_h_fractions.iter().map(|f| f / raw_tau).collect()
        } else {
            vec![0.0]
        };
        let ts: Vec<f64> =
            (0..c.cf_t_points).map(|i| c.cf_t_max * i as f64 / (c.cf_t_points - 1) as f64).collect();
        let r = polygauss_cf_check(raw_tau, &hs, &ts)?;
        push("cf_bound".into(), true, r);
    }

    let pass = reports.iter().all(|r| !r.required || r.report.pass);
    let outcome = CheckOutcome { family: law.to_string(), class, reports, pass };
    write_check(config, &outcome)?;
    Ok(outcome)
}

fn write_check(config: &RunConfig, outcome: &CheckOutcome) -> Result<()> {
    let mut t = Table::new(["check", "required", "point", "x", "empirical", "bound", "slack", "margin", "pass"]);
    for r in &outcome.reports {
        for p in &r.report.points {
            t.push(vec![
                r.name.clone(),
                r.required.to_string(),
                p.label.clone(),
                fmt_f64(p.x),
                fmt_f64(p.empirical),
                fmt_f64(p.bound),
                fmt_f64(p.slack),
                fmt_f64(p.margin),
                (p.margin >= 0.0).to_string(),
            ]);
        }
    }
    write_table(&config.out, "check", &t, "check", config)?;
    write_json(&config.out, "check", outcome)?;
    Ok(())
}

/// Wall-clock helper for the CLI's progress lines.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed().as_secs_f64())
}
