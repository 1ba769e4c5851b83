//! Run configuration: JSON on disk, validated with line-precise messages.

use std::path::{Path, PathBuf};

use efimov_core::numerics::LogScalar;
use efimov_core::potential::{PotentialModel, RESONANT_ALPHA1};
use efimov_core::three_body::{DEFAULT_POINTS_PER_PANEL, DEFAULT_RELATIVE_EPS};
use efimov_core::two_body::{WeightMode, WeightSpec, TwoBodySolution, DEFAULT_RADIAL_NODES, DEFAULT_S_FLOOR_FACTOR};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialKindConfig {
    Exponential,
    Tabulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub kind: PotentialKindConfig,
    #[serde(default = "default_alpha1")]
    pub alpha1: f64,
    #[serde(default = "default_alpha2")]
    pub alpha2: f64,
    /// CSV with columns `r,v` for tabulated potentials, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self {
            kind: PotentialKindConfig::Exponential,
            alpha1: default_alpha1(),
            alpha2: default_alpha2(),
            table: None,
        }
    }
}

fn default_alpha1() -> f64 {
    RESONANT_ALPHA1
}

fn default_alpha2() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridSchemeConfig {
    /// Composite Gauss-Legendre in `ln s`.
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Three-body nodes per block.
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_scheme")]
    pub scheme: GridSchemeConfig,
    /// Infrared floor of the three-body grid, as a multiple of `z`.
    #[serde(default = "default_s_min_factor")]
    pub s_min_factor: f64,
    #[serde(default = "default_points_per_panel")]
    pub points_per_panel: usize,
    /// Nodes of the two-body radial grid.
    #[serde(default = "default_radial_n")]
    pub radial_n: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n: default_n(),
            scheme: default_scheme(),
            s_min_factor: default_s_min_factor(),
            points_per_panel: default_points_per_panel(),
            radial_n: default_radial_n(),
        }
    }
}

fn default_n() -> usize {
    1000
}

fn default_scheme() -> GridSchemeConfig {
    GridSchemeConfig::Log
}

fn default_s_min_factor() -> f64 {
    DEFAULT_S_FLOOR_FACTOR
}

fn default_points_per_panel() -> usize {
    DEFAULT_POINTS_PER_PANEL
}

fn default_radial_n() -> usize {
    DEFAULT_RADIAL_NODES
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeConfig {
    Auto,
    Numeric,
    Asymptotic,
}

/// A `z` value as a JSON number or as a decimal string such as `"1e-400"`,
/// which may lie outside the double range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ZValue {
    Number(f64),
    Text(String),
}

/// Either an explicit list or `"log:START:END:COUNT"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ZSpec {
    Range(String),
    List(Vec<ZValue>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub potential: PotentialConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_r_eps")]
    pub r_eps: f64,
    #[serde(default = "default_z")]
    pub z: ZSpec,
    #[serde(default = "default_a_list")]
    pub a_list: Vec<f64>,
    #[serde(default = "default_mode")]
    pub mode: ModeConfig,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Trials of the randomized counting-inequality suite.
    #[serde(default = "default_trials")]
    pub weyl_trials: usize,
    /// Relative margin of the counting sandwich.
    #[serde(default = "default_relative_eps")]
    pub relative_eps: f64,
}

fn default_r_eps() -> f64 {
    0.2
}

fn default_z() -> ZSpec {
    ZSpec::Range("log:1e-10:1e-150:15".into())
}

fn default_a_list() -> Vec<f64> {
    vec![1.0]
}

fn default_mode() -> ModeConfig {
    ModeConfig::Auto
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_trials() -> usize {
    1000
}

fn default_relative_eps() -> f64 {
    DEFAULT_RELATIVE_EPS
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults parse")
    }
}

/// A validated configuration together with derived values.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub z_values: Vec<LogScalar>,
    pub hash: String,
    /// Directory the config was read from; relative paths resolve against it.
    pub base: PathBuf,
}

/// `ln` of a positive decimal literal, exact in the exponent so `1e-400` works.
pub fn parse_ln(text: &str) -> Option<f64> {
    let t = text.trim();
    let (mantissa, exponent) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i64>().ok()?),
        None => (t, 0),
    };
    let m: f64 = mantissa.parse().ok()?;
    if !(m > 0.0 && m.is_finite()) {
        return None;
    }
    Some(m.ln() + exponent as f64 * std::f64::consts::LN_10)
}

/// 1-based line of the first occurrence of `"key"` in the source, if any.
fn line_of(source: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    source.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

fn config_error(path: &Path, source: &str, key: &str, msg: impl std::fmt::Display) -> CliError {
    match line_of(source, key) {
        Some(line) => CliError::Config(format!("{}:{line}: {key}: {msg}", path.display())),
        None => CliError::Config(format!("{}: {key}: {msg}", path.display())),
    }
}

impl ZSpec {
    fn resolve(&self) -> std::result::Result<Vec<LogScalar>, String> {
        match self {
            ZSpec::Range(text) => {
                let parts: Vec<&str> = text.split(':').collect();
                if parts.len() != 4 || parts[0] != "log" {
                    return Err(format!("expected \"log:START:END:COUNT\", got {text:?}"));
                }
                let start = parse_ln(parts[1]).ok_or_else(|| format!("bad start {:?}", parts[1]))?;
                let end = parse_ln(parts[2]).ok_or_else(|| format!("bad end {:?}", parts[2]))?;
                let count: usize = parts[3].parse().map_err(|_| format!("bad count {:?}", parts[3]))?;
                if count < 2 {
                    return Err("a range needs at least 2 points".into());
                }
                Ok((0..count)
                    .map(|k| LogScalar::from_ln(start + (end - start) * k as f64 / (count - 1) as f64))
                    .collect())
            }
            ZSpec::List(values) => values
                .iter()
                .map(|v| match v {
                    ZValue::Number(x) if *x > 0.0 => Ok(LogScalar::from_f64(*x)),
                    ZValue::Number(x) => Err(format!("z must be positive, got {x}")),
                    ZValue::Text(t) => parse_ln(t)
                        .map(LogScalar::from_ln)
                        .ok_or_else(|| format!("cannot read z value {t:?}")),
                })
                .collect(),
        }
    }
}

impl RunConfig {
    /// Canonical JSON of the parsed config; hashing it makes the hash independent of
    /// whitespace and key order in the file.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn load(path: &Path) -> CliResult<LoadedConfig> {
        let source = std::fs::read_to_string(path).map_err(|e| CliError::MissingArtifact {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let config: RunConfig = serde_json::from_str(&source).map_err(|e| {
            CliError::Config(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column()))
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        config.validate(path, &source, base)
    }

    fn validate(self, path: &Path, source: &str, base: PathBuf) -> CliResult<LoadedConfig> {
        let err = |key: &str, msg: String| config_error(path, source, key, msg);
        if !(self.r_eps > 0.0 && self.r_eps < 0.25) {
            return Err(err("r_eps", format!("must lie in (0, 0.25), got {}", self.r_eps)));
        }
        let z_values = self.z.resolve().map_err(|m| err("z", m))?;
        if z_values.is_empty() {
            return Err(err("z", "list is empty".into()));
        }
        for (k, w) in z_values.windows(2).enumerate() {
            if !(w[1] < w[0]) {
                return Err(err("z", format!("values must be strictly decreasing (entries {k} and {})", k + 1)));
            }
        }
        if z_values[0] > LogScalar::from_f64(self.r_eps) {
            return Err(err("z", format!("values must not exceed r_eps = {}, got {}", self.r_eps, z_values[0])));
        }
        if self.a_list.is_empty() || self.a_list.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(err("a_list", "needs at least one positive threshold".into()));
        }
        if self.grid.n < 16 {
            return Err(err("n", format!("three-body grid needs n >= 16, got {}", self.grid.n)));
        }
        if self.grid.radial_n < 16 {
            return Err(err("radial_n", format!("radial grid needs >= 16 nodes, got {}", self.grid.radial_n)));
        }
        if self.grid.points_per_panel == 0 {
            return Err(err("points_per_panel", "must be positive".into()));
        }
        if !(self.grid.s_min_factor > 0.0 && self.grid.s_min_factor <= 1.0) {
            return Err(err("s_min_factor", format!("must lie in (0, 1], got {}", self.grid.s_min_factor)));
        }
        if !(self.potential.alpha1 > 0.0 && self.potential.alpha2 > 0.0) {
            return Err(err("potential", "alpha1 and alpha2 must be positive".into()));
        }
        match (self.potential.kind, &self.potential.table) {
            (PotentialKindConfig::Tabulated, None) => {
                return Err(err("potential", "a tabulated potential needs \"table\"".into()));
            }
            (PotentialKindConfig::Exponential, Some(_)) => {
                return Err(err("table", "only tabulated potentials take a table".into()));
            }
            _ => {}
        }
        if self.weyl_trials == 0 {
            return Err(err("weyl_trials", "must be positive".into()));
        }
        if !(self.relative_eps > 0.0 && self.relative_eps < 1.0) {
            return Err(err("relative_eps", format!("must lie in (0, 1), got {}", self.relative_eps)));
        }
        let hash = self.hash();
        Ok(LoadedConfig {
            config: self,
            z_values,
            hash,
            base,
        })
    }
}

impl LoadedConfig {
    /// Defaults, as if loaded from an empty file in the current directory.
    pub fn defaults() -> CliResult<Self> {
        RunConfig::default().validate(Path::new("<defaults>"), "", PathBuf::new())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.config.out)
    }

    pub fn potential(&self) -> CliResult<PotentialModel> {
        let p = &self.config.potential;
        match p.kind {
            PotentialKindConfig::Exponential => Ok(PotentialModel::exponential(p.alpha1, p.alpha2, 1.0)?),
            PotentialKindConfig::Tabulated => {
                let path = self.resolve(p.table.as_deref().expect("validated"));
                let mut reader = csv::Reader::from_path(&path).map_err(|e| CliError::MissingArtifact {
                    path: path.clone(),
                    reason: e.to_string(),
                })?;
                let mut radii = Vec::new();
                let mut values = Vec::new();
                for row in reader.deserialize() {
                    let (r, v): (f64, f64) = row?;
                    radii.push(r);
                    values.push(v);
                }
                PotentialModel::tabulated(radii, values, p.alpha1, p.alpha2, 1.0)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
            }
        }
    }

    pub fn weight(&self, solution: &TwoBodySolution, z: LogScalar) -> CliResult<WeightSpec> {
        let r = self.config.r_eps;
        let spec = match self.config.mode {
            ModeConfig::Auto => WeightSpec::auto(solution, r, z)?,
            ModeConfig::Numeric => WeightSpec::numeric(solution, r, z)?,
            ModeConfig::Asymptotic => WeightSpec::asymptotic(solution.c0_squared, r, z)?,
        };
        Ok(spec.with_floor_factor(self.config.grid.s_min_factor)?)
    }
}

pub fn mode_name(mode: WeightMode) -> &'static str {
    match mode {
        WeightMode::Numeric => "numeric",
        WeightMode::Asymptotic => "asymptotic",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load_str(text: &str) -> CliResult<LoadedConfig> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate(Path::new("test.json"), text, PathBuf::new())
    }

    #[test]
    fn defaults_are_valid() {
        let c = LoadedConfig::defaults().unwrap();
        assert_eq!(c.z_values.len(), 15);
        assert!((c.z_values[0].log_magnitude() - 1e-10f64.ln()).abs() < 1e-9);
        assert!((c.z_values[14].log_magnitude() + 150.0 * std::f64::consts::LN_10).abs() < 1e-9);
    }

    #[test]
    fn range_syntax_and_text_values() {
        let c = load_str(r#"{"z": ["1e-3", 1e-5, "1e-400"]}"#).unwrap();
        assert!((c.z_values[2].log_magnitude() + 400.0 * std::f64::consts::LN_10).abs() < 1e-9);
        assert!(load_str(r#"{"z": "lin:1:2:3"}"#).is_err());
        assert!((parse_ln("2.5e3").unwrap() - 2500f64.ln()).abs() < 1e-14);
        assert!(parse_ln("-1").is_none());
    }

    #[test]
    fn validation_reports_lines() {
        let text = "{\n  \"seed\": 1,\n  \"r_eps\": 0.3\n}";
        let e = load_str(text).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("test.json:3: r_eps"), "{e}");
        let e = load_str(r#"{"z": [1e-3, 1e-2]}"#).unwrap_err();
        assert!(e.to_string().contains("strictly decreasing"));
        assert!(load_str(r#"{"z": [0.21]}"#).is_err());
        assert!(load_str(r#"{"a_list": [0]}"#).is_err());
        assert!(load_str(r#"{"grid": {"scheme": "uniform"}}"#).is_err());
        assert!(load_str(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn hash_ignores_formatting() {
        let a = load_str(r#"{"seed": 3, "r_eps": 0.1}"#).unwrap();
        let b = load_str("{\n\"r_eps\":0.1,\n  \"seed\":3}").unwrap();
        let c = load_str(r#"{"seed": 4, "r_eps": 0.1}"#).unwrap();
        assert_eq!(a.hash, b.hash);
        assert_ne!(a.hash, c.hash);
        assert_eq!(a.hash.len(), 64);
    }
}
