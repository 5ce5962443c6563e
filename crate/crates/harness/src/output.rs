//! Report files: RFC-4180 CSV with a header row, JSON summaries, and a
//! `<name>.config.json` sidecar next to every CSV.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::{HarnessError, Result};

/// Plain decimal for moderate magnitudes, exponent form otherwise. Both are
/// the shortest strings that round-trip.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    command: &'a str,
    version: &'a str,
    config: &'a RunConfig,
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(format!("creating {}", dir.display()), e))
}

/// Writes `<dir>/<name>.csv` and its config sidecar. Returns the CSV path.
pub fn write_table(dir: &Path, name: &str, table: &Table, command: &str, config: &RunConfig) -> Result<PathBuf> {
    ensure_dir(dir)?;
    let path = dir.join(format!("{name}.csv"));
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(&path)?;
    w.write_record(&table.header)?;
    for r in &table.rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| HarnessError::io(format!("writing {}", path.display()), e))?;
    let sidecar = Sidecar { command, version: env!("CARGO_PKG_VERSION"), config };
    write_json(dir, &format!("{name}.config"), &sidecar)?;
    Ok(path)
}

/// Writes pretty JSON to `<dir>/<name>.json`.
pub fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<PathBuf> {
    ensure_dir(dir)?;
    let path = dir.join(format!("{name}.json"));
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| HarnessError::Config(format!("serializing {name}: {e}")))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| HarnessError::io(format!("writing {}", path.display()), e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(fmt_f64(0.0), "0");
        assert_eq!(fmt_f64(0.25), "0.25");
        assert_eq!(fmt_f64(-3.0), "-3");
        assert_eq!(fmt_f64(1.5e-7), "1.5e-7");
        assert_eq!(fmt_f64(2e20), "2e20");
        for v in [0.1, 1.0 / 3.0, 7.25e-9, 123456.789] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn csv_quoting_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new(["a", "b"]);
        t.push(vec!["x,y".into(), "1".into()]);
        write_table(dir.path(), "t", &t, "test", &RunConfig::default()).unwrap();
        let text = fs::read_to_string(dir.path().join("t.csv")).unwrap();
        assert_eq!(text, "a,b\n\"x,y\",1\n");
        let side: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("t.config.json")).unwrap()).unwrap();
        assert_eq!(side["command"], "test");
        assert_eq!(side["config"]["replicates"], 200);
    }
}
