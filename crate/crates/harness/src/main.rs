use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kmtc::commands::timed;
use kmtc::{cmd_check, cmd_compose, cmd_couple, cmd_decompose, cmd_mc, cmd_rate, thread_pool, HarnessError, RunConfig};

#[derive(Parser)]
#[command(name = "kmtc", version, about = "Dyadic coupling of random walks with Gaussian walks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one coupling and write the walk and its discrepancy path.
    Couple(Common),
    /// Monte Carlo sweep of the discrepancy over taus and depths.
    Mc(Common),
    /// Sweep and fit the median discrepancy against log n and sqrt n.
    Rate(Common),
    /// Print the block decomposition of a prefix sum.
    Decompose(Common),
    /// Estimate the class constant and run the diagnostic probes.
    Check(Common),
    /// Chain couplings over blocks of sizes 2^2, 2^4, 2^8.
    Compose(Common),
}

/// Flags shared by all subcommands. Each overrides the matching config field.
#[derive(Args)]
struct Common {
    /// JSON config file; defaults apply to anything it leaves out.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker thread cap (all cores by default).
    #[arg(long)]
    jobs: Option<usize>,
    /// Family as inline JSON, e.g. '{"variant":"poly_gaussian","tau":0.3,"d_param":1}'.
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    depth: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    taus: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    depths: Option<Vec<u32>>,
    #[arg(long)]
    replicates: Option<u64>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    stages: Option<u32>,
    /// Prefix length for `decompose`.
    #[arg(long, short)]
    m: Option<u64>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, HarnessError> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        if let Some(f) = &self.family {
            c.family = serde_json::from_str(f).map_err(|e| HarnessError::Config(format!("--family: {e}")))?;
        }
        macro_rules! set {
            ($($field:ident <- $flag:expr),*) => { $(if let Some(v) = $flag.clone() { c.$field = v; })* };
        }
        set!(seed <- self.seed, out <- self.out, d <- self.d, depth <- self.depth, taus <- self.taus,
             depths <- self.depths, replicates <- self.replicates, tolerance <- self.tolerance,
             stages <- self.stages, prefix <- self.m);
        if self.jobs.is_some() {
            c.jobs = self.jobs;
        }
        c.validate()?;
        Ok(c)
    }
}

fn run(cli: Cli) -> Result<i32, HarnessError> {
    let (name, common) = match &cli.command {
        Command::Couple(c) => ("couple", c),
        Command::Mc(c) => ("mc", c),
        Command::Rate(c) => ("rate", c),
        Command::Decompose(c) => ("decompose", c),
        Command::Check(c) => ("check", c),
        Command::Compose(c) => ("compose", c),
    };
    let config = common.resolve()?;
    let pool = thread_pool(config.jobs)?;
    let out = config.out.display();
    match name {
        "couple" => {
            let s = cmd_couple(&config)?;
            println!("delta = {:e} (N = {}, d = {}, underflow flags {}); wrote {out}/couple.csv", s.delta, s.depth, s.d, s.underflow_flags);
        }
        "mc" => {
            let (sweep, secs) = timed(|| cmd_mc(&config, &pool));
            let sweep = sweep?;
            for r in &sweep.rows {
                println!("tau {:<6} N {:>2}: median delta {:.4e}, q90 {:.4e}", r.tau, r.depth, r.median, r.q90);
            }
            println!("{} rows in {secs:.1} s; wrote {out}/mc.csv", sweep.rows.len());
        }
        "rate" => {
            let fits = cmd_rate(&config, &pool)?;
            for f in &fits {
                println!(
                    "tau {}: log-n slope {:.4} +- {:.4} (R2 {:.4}), sqrt-n R2 {:.4}",
                    f.tau, f.log_model.slope, f.log_model.slope_se, f.log_model.r2, f.sqrt_model.r2
                );
            }
            println!("wrote {out}/rate.csv");
        }
        "decompose" => print!("{}", cmd_decompose(&config)?.text),
        "check" => {
            let o = cmd_check(&config, &pool)?;
            println!("{}: tau_hat = {:.4e} on |z| <= {}", o.family, o.class.tau_hat, o.class.z_radius);
            for r in &o.reports {
                let status = if r.report.pass { "pass" } else if r.required { "FAIL" } else { "fail (advisory)" };
                println!("  {:<24} {status}  worst margin {:.3e}", r.name, r.report.worst_margin);
            }
            if !o.pass {
                eprintln!("required probes failed: {}", o.failures().join(", "));
                return Ok(1);
            }
        }
        "compose" => {
            let s = cmd_compose(&config)?;
            println!("chained delta {:e} over {} summands (block sum {:e}); wrote {out}/compose.csv", s.delta, s.summands, s.block_delta_sum);
        }
        _ => unreachable!(),
    }
    Ok(0)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
