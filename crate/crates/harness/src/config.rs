use std::path::{Path, PathBuf};

use kmtc_core::coupling::{EngineConfig, GridPolicy, DEFAULT_TOLERANCE, MAX_CHAIN_STAGES, MAX_DEPTH, MAX_DIM};
use kmtc_core::diagnostics::{BernsteinSetup, OttavianiSetup, SandwichSetup, SmoothnessSetup};
use kmtc_core::dist::{standardize, FamilySpec1D, Kind, ProductFamily};
use serde::{Deserialize, Serialize};

use crate::{HarnessError, Result};

/// Largest depth accepted by `decompose`.
pub const MAX_DECOMPOSE_DEPTH: u32 = 20;

/// Parameters shared by all subcommands. Each command reads the fields it needs.
///
/// `out` and `jobs` are not serialized: they do not affect results, and
/// leaving them out keeps the config sidecars identical across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub family: FamilySpec1D,
    /// Rescale the family to mean 0 and unit variance before use.
    pub standardize: bool,
    pub d: usize,
    /// Tree depth for `couple`, and for `decompose`.
    pub depth: u32,
    /// Values substituted for the `tau` of a poly_gaussian family in `mc` and
    /// `rate`. Empty means the family as given.
    pub taus: Vec<f64>,
    pub depths: Vec<u32>,
    pub replicates: u64,
    pub seed: u64,
    pub grid: GridPolicy,
    pub tolerance: f64,
    /// Chain stages for `compose`.
    pub stages: u32,
    /// Prefix length `m` for `decompose`.
    pub prefix: u64,
    pub check: CheckConfig,
    #[serde(skip_serializing)]
    pub out: PathBuf,
    #[serde(skip_serializing)]
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            family: FamilySpec1D::standard_gaussian(),
            standardize: true,
            d: 1,
            depth: 10,
            taus: Vec::new(),
            depths: vec![6, 7, 8, 9, 10],
            replicates: 200,
            seed: 0,
            grid: GridPolicy::default(),
            tolerance: DEFAULT_TOLERANCE,
            stages: MAX_CHAIN_STAGES,
            prefix: 3,
            check: CheckConfig::default(),
            out: PathBuf::from("out"),
            jobs: None,
        }
    }
}

/// Settings for `check`. Probe seeds are taken from the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckConfig {
    /// Real tilts scanned by the class estimate, in standardized units.
    pub z_radius: f64,
    pub smoothness_levels: Vec<u32>,
    /// `level` and `j` are set per check.
    pub smoothness: SmoothnessSetup,
    pub bernstein: BernsteinSetup,
    pub ottaviani: OttavianiSetup,
    pub sandwich_levels: Vec<u32>,
    pub sandwich: SandwichSetup,
    /// CF bound tilts as multiples of `1/tau`.
    pub cf_h_fractions: Vec<f64>,
    pub cf_t_max: f64,
    pub cf_t_points: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            z_radius: 8.0,
            smoothness_levels: vec![1, 2, 3, 4],
            smoothness: SmoothnessSetup::default(),
            bernstein: BernsteinSetup::default(),
            ottaviani: OttavianiSetup::default(),
            sandwich_levels: vec![4],
            sandwich: SandwichSetup::default(),
            cf_h_fractions: vec![-0.9, -0.5, 0.0, 0.5, 0.9],
            cf_t_max: 10.0,
            cf_t_points: 201,
        }
    }
}

/// A validation failure tied to a config field.
struct Invalid {
    field: &'static str,
    msg: String,
}

fn invalid(field: &'static str, msg: impl Into<String>) -> Invalid {
    Invalid { field, msg: msg.into() }
}

impl RunConfig {
    /// Parses JSON config text. Syntax and type errors carry serde's line
    /// and column; semantic errors name the line where the field appears.
    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("{origin}: {e}")))?;
        cfg.check_fields().map_err(|v| {
            let at = field_line(text, v.field).map(|l| format!(" at line {l}")).unwrap_or_default();
            HarnessError::Config(format!("{origin}{at}: `{}`: {}", v.field, v.msg))
        })?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::io(format!("reading {}", path.display()), e))?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        self.check_fields()
            .map_err(|v| HarnessError::Config(format!("`{}`: {}", v.field, v.msg)))
    }

    fn check_fields(&self) -> std::result::Result<(), Invalid> {
        self.family.validate().map_err(|e| invalid("family", e.to_string()))?;
        if !(1..=MAX_DIM).contains(&self.d) {
            return Err(invalid("d", format!("must be in 1..={MAX_DIM}, got {}", self.d)));
        }
        if self.replicates == 0 {
            return Err(invalid("replicates", "must be at least 1"));
        }
        if !(1..=MAX_DECOMPOSE_DEPTH).contains(&self.depth) {
            return Err(invalid("depth", format!("must be in 1..={MAX_DECOMPOSE_DEPTH}, got {}", self.depth)));
        }
        if let Some(&n) = self.depths.iter().find(|n| !(1..=MAX_DEPTH).contains(n)) {
            return Err(invalid("depths", format!("depth {n} outside 1..={MAX_DEPTH}")));
        }
        if !self.taus.is_empty() {
            if !matches!(self.family.kind, Kind::PolyGaussian { .. }) {
                return Err(invalid("taus", "a tau sweep needs a poly_gaussian family"));
            }
            if let Some(t) = self.taus.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
                return Err(invalid("taus", format!("tau {t} must be finite and >= 0")));
            }
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1e-2) {
            return Err(invalid("tolerance", format!("{} outside (0, 0.01)", self.tolerance)));
        }
        self.grid.validate().map_err(|e| invalid("grid", e.to_string()))?;
        if !(1..=MAX_CHAIN_STAGES).contains(&self.stages) {
            return Err(invalid("stages", format!("must be in 1..={MAX_CHAIN_STAGES}, got {}", self.stages)));
        }
        if self.prefix == 0 {
            return Err(invalid("prefix", "must be at least 1"));
        }
        if self.jobs == Some(0) {
            return Err(invalid("jobs", "must be at least 1"));
        }
        let c = &self.check;
        if !(c.z_radius.is_finite() && c.z_radius > 0.0) {
            return Err(invalid("z_radius", format!("must be positive, got {}", c.z_radius)));
        }
        if c.cf_t_points < 2 || !(c.cf_t_max > 0.0) {
            return Err(invalid("cf_t_points", "CF grid needs at least 2 points and a positive cf_t_max"));
        }
        Ok(())
    }

    /// The family with `tau` replaced (poly_gaussian only).
    pub fn family_with_tau(&self, tau: Option<f64>) -> FamilySpec1D {
        let mut f = self.family.clone();
        if let (Some(t), Kind::PolyGaussian { tau, .. }) = (tau, &mut f.kind) {
            *tau = t;
        }
        f
    }

    /// The coordinate law the engine sees.
    pub fn coordinate_law(&self, tau: Option<f64>) -> Result<FamilySpec1D> {
        let f = self.family_with_tau(tau);
        Ok(if self.standardize { standardize(&f)? } else { f })
    }

    pub fn engine_config(&self, depth: u32, tau: Option<f64>) -> Result<EngineConfig> {
        let family = ProductFamily::iid(self.coordinate_law(tau)?, self.d)?;
        let cfg = EngineConfig {
            depth,
            family,
            grid: self.grid,
            tolerance: self.tolerance,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// First line (1-based) mentioning `"field"`.
fn field_line(text: &str, field: &str) -> Option<usize> {
    let key = format!("\"{field}\"");
    text.lines().position(|l| l.contains(&key)).map(|i| i + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_default() {
        assert_eq!(RunConfig::from_json("{}", "t").unwrap(), RunConfig::default());
    }

    #[test]
    fn shipped_examples_parse() {
        for (name, text) in [
            ("rate.json", include_str!("../../../docs/examples/rate.json")),
            ("check_smoothed.json", include_str!("../../../docs/examples/check_smoothed.json")),
        ] {
            RunConfig::from_json(text, name).unwrap();
        }
    }

    #[test]
    fn family_in_tagged_form() {
        let cfg = RunConfig::from_json(
            r#"{"family": {"variant": "poly_gaussian", "tau": 0.3, "d_param": 1}, "d": 1}"#,
            "t",
        )
        .unwrap();
        assert_eq!(cfg.family, FamilySpec1D::poly_gaussian(0.3, 1));
    }

    #[test]
    fn syntax_error_has_line() {
        let e = RunConfig::from_json("{\n  \"d\": 1,\n  \"seed\": x\n}", "cfg.json").unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        assert_eq!(e.exit_code(), 1);
    }

    #[test]
    fn semantic_error_has_line() {
        let e = RunConfig::from_json("{\n  \"seed\": 1,\n  \"replicates\": 0\n}", "cfg.json").unwrap_err();
        let s = e.to_string();
        assert!(s.contains("line 3") && s.contains("replicates"), "{s}");
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(RunConfig::from_json(r#"{"replicate": 3}"#, "t").is_err());
    }

    #[test]
    fn tau_sweep_needs_poly_gaussian() {
        assert!(RunConfig::from_json(r#"{"taus": [0.1]}"#, "t").is_err());
    }

    #[test]
    fn sidecar_omits_run_location() {
        let cfg = RunConfig { jobs: Some(3), out: "elsewhere".into(), ..RunConfig::default() };
        let v = serde_json::to_value(&cfg).unwrap();
        assert!(v.get("jobs").is_none() && v.get("out").is_none());
    }
}
