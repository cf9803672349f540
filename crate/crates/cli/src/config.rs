//! Run configuration: a versioned JSON file merged with command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Numerical tolerances. They form part of the cache key.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub bracket_rel_width: f64,
    pub nehari_gate: f64,
    pub pohozaev_gate: f64,
    pub stability_tol: f64,
    pub refine_rel_width: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let curve = exterior_gs::CurveConfig::default();
        Self {
            rel_tol: curve.shooter.integrator.rel_tol,
            abs_tol: curve.shooter.integrator.abs_tol,
            bracket_rel_width: curve.shooter.bracket_rel_width,
            nehari_gate: curve.nehari_gate,
            pohozaev_gate: curve.pohozaev_gate,
            stability_tol: curve.stability_tol,
            refine_rel_width: curve.refine_rel_width,
        }
    }
}

impl Tolerances {
    pub fn curve_config(&self) -> exterior_gs::CurveConfig {
        let mut cfg = exterior_gs::CurveConfig::default();
        cfg.shooter.integrator.rel_tol = self.rel_tol;
        cfg.shooter.integrator.abs_tol = self.abs_tol;
        cfg.shooter.bracket_rel_width = self.bracket_rel_width;
        cfg.nehari_gate = self.nehari_gate;
        cfg.pohozaev_gate = self.pohozaev_gate;
        cfg.stability_tol = self.stability_tol;
        cfg.refine_rel_width = self.refine_rel_width;
        cfg
    }
}

/// Contents of a `--config` file. Every field except `schema_version` is
/// optional; unknown fields are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub schema_version: u32,
    pub n: Option<usize>,
    pub p: Option<f64>,
    pub lambda: Option<f64>,
    pub radius: Option<f64>,
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
    pub points: Option<usize>,
    pub radii: Option<Vec<f64>>,
    pub svg: Option<bool>,
    pub fd_nodes: Option<usize>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub cache: Option<bool>,
    pub tolerances: Option<Tolerances>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Validation(msg) => CliError::Validation(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: FileConfig =
            serde_json::from_str(text).map_err(|e| CliError::Validation(format!("invalid config: {e}")))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::Validation(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }
}

/// Flag values take precedence over file values.
pub fn pick<T: Clone>(flag: Option<T>, file: &Option<T>) -> Option<T> {
    flag.or_else(|| file.clone())
}

pub fn require<T>(value: Option<T>, name: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Validation(format!("missing required parameter `{name}`")))
}
