use std::fs;
use std::process::Command;

use kmtc::commands::{rate_fits, MIN_RATE_DEPTHS};
use kmtc::{cmd_check, cmd_compose, cmd_couple, cmd_decompose, cmd_mc, cmd_rate, run_sweep, thread_pool, RunConfig};
use kmtc_core::dist::FamilySpec1D;

fn base(out: &std::path::Path) -> RunConfig {
    RunConfig { out: out.to_path_buf(), ..RunConfig::default() }
}

#[test]
fn gaussian_couple_stays_under_tolerance_bound() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig { depth: 8, d: 2, seed: 42, ..base(dir.path()) };
    let s = cmd_couple(&cfg).unwrap();
    assert!(s.delta <= s.gaussian_bound, "{} > {}", s.delta, s.gaussian_bound);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("couple.json")).unwrap()).unwrap();
    for key in ["seed", "N", "d", "family", "delta", "underflow_flags"] {
        assert!(json.get(key).is_some(), "summary lacks {key}");
    }
}

#[test]
fn couple_csv_shape() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig { family: FamilySpec1D::poly_gaussian(0.3, 1), depth: 10, ..base(dir.path()) };
    cmd_couple(&cfg).unwrap();
    let text = fs::read_to_string(dir.path().join("couple.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "k,X_1,Y_1,disc");
    assert_eq!(lines.len(), 1 + 1024);
    assert!(lines.iter().all(|l| l.split(',').count() == 2 * cfg.d + 2));
    assert!(!text.contains('\r'));
    assert!(dir.path().join("couple.config.json").exists());
}

#[test]
fn zero_tau_row_skips_fits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        family: FamilySpec1D::poly_gaussian(0.2, 1),
        taus: vec![0.0, 0.2],
        depths: vec![6],
        replicates: 120,
        ..base(dir.path())
    };
    let sweep = cmd_mc(&cfg, &thread_pool(Some(2)).unwrap()).unwrap();
    assert_eq!(sweep.rows.len(), 2);
    let (zero, pos) = (&sweep.rows[0], &sweep.rows[1]);
    assert!(zero.max <= zero.gaussian_bound && zero.tail.is_none() && zero.moments.is_empty());
    let tail = pos.tail.as_ref().unwrap();
    assert!(tail.c2.is_finite() && tail.c2 > 0.0);
    assert!(sweep.rows.iter().all(|r| r.median >= 0.0 && r.median.is_finite()));
    for f in ["mc.csv", "mc.json", "mc_replicates.csv", "mc_timing.json", "mc.config.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn rate_needs_enough_depths() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig { depths: vec![6, 7, 8], ..base(dir.path()) };
    let e = cmd_rate(&cfg, &thread_pool(Some(1)).unwrap()).unwrap_err();
    assert_eq!(e.exit_code(), 1);
    assert_eq!(MIN_RATE_DEPTHS, 4);
}

#[test]
fn gaussian_rate_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig { depths: vec![4, 5, 6, 7], replicates: 20, ..base(dir.path()) };
    let fits = cmd_rate(&cfg, &thread_pool(None).unwrap()).unwrap();
    assert!(fits[0].log_model.slope.abs() < 1e-6, "{:?}", fits[0].log_model);
}

#[test]
fn slope_grows_with_tau() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        family: FamilySpec1D::poly_gaussian(0.1, 1),
        taus: vec![0.1, 0.4],
        depths: vec![6, 7, 8, 9, 10, 11],
        replicates: 100,
        ..base(dir.path())
    };
    let fits = rate_fits(&run_sweep(&cfg, &thread_pool(None).unwrap()).unwrap()).unwrap();
    let (lo, hi) = (&fits[0].log_model, &fits[1].log_model);
    assert!(hi.slope - lo.slope > 2.0 * lo.slope_se.hypot(hi.slope_se), "{lo:?} vs {hi:?}");
}

#[test]
fn decompose_examples() {
    let dir = tempfile::tempdir().unwrap();
    for (m, n, expect) in [
        (3, 2, "3/4·S₄ + 1/4·Ũ_{2,0} + 1/2·Ũ_{1,1}"),
        (4, 2, "1·S₄"),
        (2, 2, "1/2·S₄ + 1/2·Ũ_{2,0}"),
    ] {
        let cfg = RunConfig { prefix: m, depth: n, ..base(dir.path()) };
        let out = cmd_decompose(&cfg).unwrap();
        assert_eq!(out.decomposition.to_string(), expect);
        assert!(out.text.contains(expect));
    }
    let cfg = RunConfig { prefix: 5, depth: 2, ..base(dir.path()) };
    assert_eq!(cmd_decompose(&cfg).unwrap_err().exit_code(), 1);
}

#[test]
fn compose_respects_block_sum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig { family: FamilySpec1D::poly_gaussian(0.3, 1), stages: 3, ..base(dir.path()) };
    let s = cmd_compose(&cfg).unwrap();
    assert_eq!(s.summands, 256);
    assert!(s.within_block_sum);
    let rows = fs::read_to_string(dir.path().join("compose.csv")).unwrap().lines().count();
    assert_eq!(rows, 257);
}

fn quick_check(family: FamilySpec1D, out: &std::path::Path) -> RunConfig {
    let mut cfg = RunConfig { family, ..base(out) };
    cfg.check.bernstein.reps = 200_000;
    cfg.check.ottaviani.reps = 20_000;
    cfg.check.smoothness_levels = vec![1, 2];
    cfg
}

#[test]
fn gaussian_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = cmd_check(&quick_check(FamilySpec1D::standard_gaussian(), dir.path()), &thread_pool(None).unwrap()).unwrap();
    assert!(o.class.tau_hat <= 1e-4);
    assert!(o.reports.iter().all(|r| r.report.pass), "{:?}", o.reports.iter().filter(|r| !r.report.pass).map(|r| &r.name).collect::<Vec<_>>());
    assert!(o.pass);
}

#[test]
fn poly_gaussian_check_includes_cf_bound() {
    let dir = tempfile::tempdir().unwrap();
    let o = cmd_check(&quick_check(FamilySpec1D::poly_gaussian(0.5, 1), dir.path()), &thread_pool(None).unwrap()).unwrap();
    let cf = o.reports.iter().find(|r| r.name == "cf_bound").unwrap();
    assert!(cf.required && cf.report.pass);
    assert!(o.pass);
    let header = fs::read_to_string(dir.path().join("check.csv")).unwrap();
    assert!(header.starts_with("check,required,point,x,empirical,bound,slack,margin,pass\n"));
}

#[test]
fn small_convolution_power_smoothness_is_advisory() {
    let dir = tempfile::tempdir().unwrap();
    let f = FamilySpec1D::conv_power(FamilySpec1D::uniform(1.0), 2);
    let o = cmd_check(&quick_check(f, dir.path()), &thread_pool(None).unwrap()).unwrap();
    let smooth: Vec<_> = o.reports.iter().filter(|r| r.name.starts_with("smoothness")).collect();
    assert!(!smooth.is_empty() && smooth.iter().all(|r| !r.required));
    // the outcome only depends on required probes
    assert_eq!(o.pass, o.reports.iter().filter(|r| r.required).all(|r| r.report.pass));
}

fn kmtc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kmtc"))
}

#[test]
fn cli_exit_codes_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\n  \"d\": 1,\n  \"replicates\": 0\n}\n").unwrap();
    let out = kmtc().args(["mc", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let good = dir.path().join("good.json");
    fs::write(&good, r#"{"depth": 4, "seed": 1}"#).unwrap();
    let out_dir = dir.path().join("run");
    let out = kmtc()
        .args(["couple", "--config"])
        .arg(&good)
        .args(["--depth", "5", "--seed", "9", "--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let side: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("couple.config.json")).unwrap()).unwrap();
    assert_eq!(side["config"]["depth"], 5);
    assert_eq!(side["config"]["seed"], 9);

    let out = kmtc().args(["decompose", "-m", "3", "--depth", "2"]).output().unwrap();
    assert!(String::from_utf8_lossy(&out.stdout).contains("3/4·S₄ + 1/4·Ũ_{2,0} + 1/2·Ũ_{1,1}"));
}
