//! Run configuration: JSON schema, defaults and validation.

use crate::descent::DescentOptions;
use crate::error::{Error, Result};
use crate::grid::{DEFAULT_BETA_MAX, DEFAULT_GRADING, DEFAULT_NODES, DEFAULT_RMAX};
use crate::nonlinearity::{Nonlinearity, TableG};
use crate::regime::{RegimeOptions, SweepCell};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum NonlinearitySpec {
    Power { r: f64 },
    Table { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub nodes: usize,
    pub r_max: f64,
    pub grading: f64,
    pub beta_max: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { nodes: DEFAULT_NODES, r_max: DEFAULT_RMAX, grading: DEFAULT_GRADING, beta_max: DEFAULT_BETA_MAX }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub descent_tol: f64,
    pub max_iter: usize,
    pub threshold_rel_width: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let d = DescentOptions::default();
        Tolerances { descent_tol: d.tol, max_iter: d.max_iter, threshold_rel_width: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

/// Either an explicit list or `count` points from `min` to `max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    Values(Vec<f64>),
    Range {
        min: f64,
        max: f64,
        count: usize,
        #[serde(default)]
        spacing: Spacing,
    },
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Axis::Values(v) => v.clone(),
            Axis::Range { min, max, count, spacing } => {
                if *count == 1 {
                    return vec![*min];
                }
                (0..*count)
                    .map(|i| {
                        let t = i as f64 / (*count - 1) as f64;
                        match spacing {
                            Spacing::Linear => min + (max - min) * t,
                            Spacing::Log => min * (max / min).powf(t),
                        }
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Exponents; defaults to the configured power `r`.
    #[serde(default)]
    pub r: Option<Axis>,
    pub m: Axis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(rename = "N")]
    pub n: usize,
    pub nonlinearity: NonlinearitySpec,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub seed: u64,
    /// Directory of the config file; relative table paths resolve against it.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn cfg_err(path: &str, msg: impl Into<String>) -> Error {
    Error::Config { path: path.into(), msg: msg.into() }
}

pub fn load_config(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path).map_err(|e| cfg_err("<file>", format!("{}: {e}", path.display())))?;
    let mut cfg = parse_config(&text)?;
    cfg.base_dir = path.parent().map(Path::to_path_buf);
    cfg.validate()?;
    Ok(cfg)
}

/// Parses and validates a JSON document; table paths are not opened.
pub fn parse_config(text: &str) -> Result<Config> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| {
        let p = e.path().to_string();
        cfg_err(if p == "." { "<root>" } else { &p }, e.inner().to_string())
    })?;
    cfg.check_values()?;
    Ok(cfg)
}

impl Config {
    fn check_values(&self) -> Result<()> {
        if !matches!(self.n, 2 | 3) {
            return Err(cfg_err("N", format!("N = {} is unsupported (supported dimensions: 2, 3)", self.n)));
        }
        if let NonlinearitySpec::Power { r } = self.nonlinearity {
            Nonlinearity::power(r, self.n)?;
        }
        let g = &self.grid;
        if g.nodes < 16 {
            return Err(cfg_err("grid.nodes", format!("{} nodes is below the minimum of 16", g.nodes)));
        }
        if !(g.r_max > 0.0 && g.r_max.is_finite()) {
            return Err(cfg_err("grid.r_max", "must be positive and finite"));
        }
        if !(g.grading >= 0.0 && g.grading.is_finite()) {
            return Err(cfg_err("grid.grading", "must be nonnegative and finite"));
        }
        if !(g.beta_max > 0.0) {
            return Err(cfg_err("grid.beta_max", "must be positive"));
        }
        let t = &self.tolerances;
        if !(t.descent_tol > 0.0 && t.descent_tol < 1.0) {
            return Err(cfg_err("tolerances.descent_tol", "must lie in (0, 1)"));
        }
        if t.max_iter == 0 {
            return Err(cfg_err("tolerances.max_iter", "must be positive"));
        }
        if !(t.threshold_rel_width > 0.0 && t.threshold_rel_width < 1.0) {
            return Err(cfg_err("tolerances.threshold_rel_width", "must lie in (0, 1)"));
        }
        if let Some(sw) = &self.sweep {
            check_axis("sweep.m", &sw.m, |m| m > 0.0 && m.is_finite(), "masses must be positive and finite")?;
            match &sw.r {
                Some(ax) => {
                    check_axis("sweep.r", ax, |_| true, "")?;
                    for (i, r) in ax.values().into_iter().enumerate() {
                        Nonlinearity::power(r, self.n).map_err(|e| match e {
                            Error::Config { msg, .. } => cfg_err(&format!("sweep.r[{i}]"), msg),
                            other => other,
                        })?;
                    }
                }
                None if !matches!(self.nonlinearity, NonlinearitySpec::Power { .. }) => {
                    return Err(cfg_err("sweep.r", "required when the nonlinearity is not a power law"));
                }
                None => {}
            }
        }
        Ok(())
    }

    /// Full validation, including reading a tabulated nonlinearity.
    pub fn validate(&self) -> Result<()> {
        self.check_values()?;
        self.nonlinearity_for(None).map(|_| ())
    }

    pub fn nonlinearity_for(&self, r: Option<f64>) -> Result<Nonlinearity> {
        if let Some(r) = r {
            return Nonlinearity::power(r, self.n);
        }
        match &self.nonlinearity {
            NonlinearitySpec::Power { r } => Nonlinearity::power(*r, self.n),
            NonlinearitySpec::Table { path } => {
                let p = match &self.base_dir {
                    Some(d) if path.is_relative() => d.join(path),
                    _ => path.clone(),
                };
                Nonlinearity::table(TableG::from_csv(&p)?, self.n)
            }
        }
    }

    pub fn regime_options(&self) -> RegimeOptions {
        RegimeOptions {
            descent: DescentOptions { tol: self.tolerances.descent_tol, max_iter: self.tolerances.max_iter, ..Default::default() },
            nodes: self.grid.nodes,
            r_max: self.grid.r_max,
            grading: self.grid.grading,
            cross_check: false,
            rel_width: self.tolerances.threshold_rel_width,
        }
    }

    /// Sweep cells in row-major order (`r` outer, `m` inner).
    pub fn sweep_cells(&self) -> Result<Vec<SweepCell>> {
        let sw = self.sweep.as_ref().ok_or_else(|| cfg_err("sweep", "missing sweep section"))?;
        let rs = match (&sw.r, &self.nonlinearity) {
            (Some(ax), _) => ax.values(),
            (None, NonlinearitySpec::Power { r }) => vec![*r],
            (None, _) => return Err(cfg_err("sweep.r", "required when the nonlinearity is not a power law")),
        };
        let ms = sw.m.values();
        Ok(rs.iter().flat_map(|&r| ms.iter().map(move |&m| SweepCell { r, m })).collect())
    }

    /// Canonical JSON of the validated configuration, defaults included.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON echo, hex encoded.
    pub fn hash(&self) -> String {
        hash_json(&self.echo())
    }
}

pub fn hash_json(v: &serde_json::Value) -> String {
    let bytes = serde_json::to_vec(v).expect("json serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn check_axis(path: &str, ax: &Axis, ok: impl Fn(f64) -> bool, msg: &str) -> Result<()> {
    match ax {
        Axis::Values(v) if v.is_empty() => return Err(cfg_err(path, "empty list")),
        Axis::Range { count: 0, .. } => return Err(cfg_err(&format!("{path}.count"), "must be positive")),
        Axis::Range { min, max, .. } if !(min <= max) => return Err(cfg_err(path, "min must not exceed max")),
        Axis::Range { min, spacing: Spacing::Log, .. } if !(*min > 0.0) => {
            return Err(cfg_err(&format!("{path}.min"), "log spacing needs a positive minimum"))
        }
        _ => {}
    }
    if let Some((i, x)) = ax.values().into_iter().enumerate().find(|(_, x)| !ok(*x)) {
        return Err(cfg_err(&format!("{path}[{i}]"), format!("{x}: {msg}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(r#"{"N":3,"nonlinearity":{"kind":"power","r":3}}"#).unwrap();
        assert_eq!(c.grid, GridConfig::default());
        assert_eq!(c.seed, 0);
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn rejections_name_the_field() {
        let e = parse_config(r#"{"N":4,"nonlinearity":{"kind":"power","r":3}}"#).unwrap_err();
        assert!(matches!(e, Error::Config { ref path, .. } if path == "N"), "{e}");
        let e = parse_config(r#"{"N":3,"nonlinearity":{"kind":"power","r":1.5}}"#).unwrap_err();
        assert!(matches!(e, Error::Config { ref path, .. } if path == "nonlinearity.r"), "{e}");
        let e = parse_config(r#"{"N":3,"nonlinearity":{"kind":"power","r":3},"grid":{"nodez":5}}"#).unwrap_err();
        assert!(e.to_string().contains("grid"), "{e}");
    }

    #[test]
    fn axis_spacing() {
        let ax = Axis::Range { min: 0.1, max: 10.0, count: 3, spacing: Spacing::Log };
        let v = ax.values();
        assert!((v[1] - 1.0).abs() < 1e-12);
    }
}
