//! TOML run configuration: model constants, grid/solver settings, Monte
//! Carlo settings and output options. Unknown keys are rejected so typos
//! surface as configuration errors rather than silently applied defaults.

use crate::hjb::{GridConfig, JumpFormula, SolverConfig};
use crate::model::{ClaimLaw, ModelError, ModelParams};
use serde::Deserialize;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid model parameters: {0}")]
    Model(#[from] ModelError),
    #[error("jump_formula must be \"derived\" or \"printed\", got {0:?}")]
    JumpFormula(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub k1: f64,
    pub k2: f64,
    pub beta: f64,
    #[serde(default = "default_zeta0")]
    pub zeta0: f64,
    pub r: f64,
    pub rho: f64,
    pub claims: Vec<ClaimEntry>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClaimEntry {
    pub y: f64,
    pub prob: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_control_points")]
    pub control_points: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_jump_formula")]
    pub jump_formula: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Optional override of the simulation horizon (default: long enough
    /// that the residual discount factor is below 1e-6).
    #[serde(default)]
    pub t_max: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Number of simulated paths to dump in full event detail.
    #[serde(default)]
    pub dump_paths: usize,
}

fn default_zeta0() -> f64 {
    0.04
}
fn default_n() -> usize {
    2000
}
fn default_control_points() -> usize {
    101
}
fn default_tol() -> f64 {
    1e-8
}
fn default_max_iter() -> usize {
    500
}
fn default_jump_formula() -> String {
    "derived".into()
}
fn default_paths() -> usize {
    100_000
}
fn default_seed() -> u64 {
    42
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n: default_n(), control_points: default_control_points() }
    }
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            max_iter: default_max_iter(),
            jump_formula: default_jump_formula(),
        }
    }
}

impl Default for McSection {
    fn default() -> Self {
        Self { paths: default_paths(), seed: default_seed(), t_max: None }
    }
}

impl RunConfig {
    pub fn from_str(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_str(&text)
    }

    pub fn model_params(&self) -> Result<ModelParams, ConfigError> {
        let m = &self.model;
        let claims = ClaimLaw::new(m.claims.iter().map(|c| (c.y, c.prob)).collect())?;
        Ok(ModelParams::new(m.k1, m.k2, m.beta, m.zeta0, m.r, m.rho, claims)?)
    }

    pub fn grid_config(&self) -> GridConfig {
        GridConfig { n: self.grid.n, control_points: self.grid.control_points }
    }

    pub fn jump_formula(&self) -> Result<JumpFormula, ConfigError> {
        match self.solver.jump_formula.as_str() {
            "derived" => Ok(JumpFormula::Derived),
            "printed" => Ok(JumpFormula::Printed),
            other => Err(ConfigError::JumpFormula(other.to_string())),
        }
    }

    pub fn solver_config(&self) -> Result<SolverConfig, ConfigError> {
        Ok(SolverConfig {
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
            jump_formula: self.jump_formula()?,
            ..SolverConfig::default()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [model]
        k1 = 0.2
        k2 = 0.25
        beta = 0.0011
        r = 0.07
        rho = 0.1
        claims = [{ y = 1.0, prob = 1.0 }]
    "#;

    #[test]
    fn minimal_config_uses_documented_defaults() {
        let cfg = RunConfig::from_str(MINIMAL).unwrap();
        assert_eq!(cfg.model.zeta0, 0.04);
        assert_eq!(cfg.grid.n, 2000);
        assert_eq!(cfg.grid.control_points, 101);
        assert_eq!(cfg.solver.tol, 1e-8);
        assert_eq!(cfg.solver.max_iter, 500);
        assert_eq!(cfg.mc.paths, 100_000);
        assert_eq!(cfg.mc.seed, 42);
        assert!(cfg.mc.t_max.is_none());
        assert_eq!(cfg.jump_formula().unwrap(), JumpFormula::Derived);
        let params = cfg.model_params().unwrap();
        assert!((params.solvency_coefficient() - 250.0).abs() < 1e-9);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}\n[solver]\ntolerance = 1e-8\n");
        let err = RunConfig::from_str(&text);
        assert!(matches!(err, Err(ConfigError::Parse(_))), "{err:?}");
    }

    #[test]
    fn bad_jump_formula_is_rejected() {
        let text = format!("{MINIMAL}\n[solver]\njump_formula = \"exact\"\n");
        let cfg = RunConfig::from_str(&text).unwrap();
        assert!(matches!(cfg.jump_formula(), Err(ConfigError::JumpFormula(_))));
    }

    #[test]
    fn invalid_model_surfaces_as_config_error() {
        let text = MINIMAL.replace("rho = 0.1", "rho = 1.5");
        let cfg = RunConfig::from_str(&text).unwrap();
        assert!(matches!(cfg.model_params(), Err(ConfigError::Model(_))));
    }

    #[test]
    fn multi_atom_claim_law_round_trips() {
        let text = MINIMAL.replace(
            "claims = [{ y = 1.0, prob = 1.0 }]",
            "claims = [{ y = 0.5, prob = 0.4 }, { y = 2.0, prob = 0.6 }]",
        );
        let cfg = RunConfig::from_str(&text).unwrap();
        let params = cfg.model_params().unwrap();
        assert!((params.claims.mean() - (0.5 * 0.4 + 2.0 * 0.6)).abs() < 1e-14);
    }
}
