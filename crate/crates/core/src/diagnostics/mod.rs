//! Numeric evidence for the hypotheses the coupling relies on: the analytic
//! class condition on the log-MGF, smoothness of conjugate characteristic
//! functions, and Monte Carlo probes of the tail and maximal inequalities.

mod cf;
mod class;
mod probes;
mod sandwich;
mod smoothness;

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

pub use cf::{cf_abs, polygauss_cf_bound, polygauss_cf_check, CfAbs, TiltedCf};
pub use class::{estimate_tau, ClassReport, Witness};
pub use probes::{bernstein_probe, ottaviani_probe, BernsteinSetup, OttavianiSetup};
pub use sandwich::{sandwich_probe, SandwichSetup};
pub use smoothness::{check_smoothness_integrals, SmoothnessSetup};

/// One test point of a probe. `slack` is the allowance added to `bound`
/// (Monte Carlo error, quadrature error); `margin = bound + slack - empirical`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbePoint {
    pub label: String,
    pub x: f64,
    pub empirical: f64,
    pub bound: f64,
    pub slack: f64,
    pub margin: f64,
}

impl ProbePoint {
    pub fn new(label: impl Into<String>, x: f64, empirical: f64, bound: f64, slack: f64) -> Self {
        Self {
            label: label.into(),
            x,
            empirical,
            bound,
            slack,
            margin: bound + slack - empirical,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub probe: String,
    pub points: Vec<ProbePoint>,
    pub worst_margin: f64,
    pub fitted: BTreeMap<String, f64>,
    pub pass: bool,
    pub notes: Vec<String>,
}

impl ProbeReport {
    /// Passes iff every margin is nonnegative.
    pub fn from_points(probe: impl Into<String>, points: Vec<ProbePoint>) -> Self {
        let worst_margin = points.iter().map(|p| p.margin).fold(f64::INFINITY, f64::min);
        let pass = points.iter().all(|p| p.margin >= 0.0);
        Self {
            probe: probe.into(),
            points,
            worst_margin,
            fitted: BTreeMap::new(),
            pass,
            notes: Vec::new(),
        }
    }

    pub fn note(mut self, msg: impl Into<String>) -> Self {
        self.notes.push(msg.into());
        self
    }

    pub fn fit(mut self, name: &str, value: f64) -> Self {
        self.fitted.insert(name.to_string(), value);
        self
    }

    pub fn fail(mut self, msg: impl Into<String>) -> Self {
        self.pass = false;
        self.notes.push(msg.into());
        self
    }

    pub fn write_csv_header(w: &mut impl Write) -> io::Result<()> {
        writeln!(w, "probe,point,x,empirical,bound,slack,margin")
    }

    /// Rows `probe,point,x,empirical,bound,slack,margin`; labels are quoted.
    pub fn write_csv_rows(&self, w: &mut impl Write) -> io::Result<()> {
        for p in &self.points {
            writeln!(
                w,
                "{},{},{:e},{:e},{:e},{:e},{:e}",
                csv_field(&self.probe),
                csv_field(&p.label),
                p.x,
                p.empirical,
                p.bound,
                p.slack,
                p.margin
            )?;
        }
        Ok(())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_pass_and_csv() {
        let r = ProbeReport::from_points(
            "demo",
            vec![
                ProbePoint::new("a", 0.0, 0.5, 1.0, 0.0),
                ProbePoint::new("h=(1,2)", 1.0, 1.05, 1.0, 0.1),
            ],
        );
        assert!(r.pass);
        assert!((r.worst_margin - 0.05).abs() < 1e-12);
        let mut out = Vec::new();
        ProbeReport::write_csv_header(&mut out).unwrap();
        r.write_csv_rows(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.contains("\"h=(1,2)\""));
        let bad = ProbeReport::from_points("x", vec![ProbePoint::new("p", 0.0, 2.0, 1.0, 0.5)]);
        assert!(!bad.pass);
    }
}
