//! Run configuration documents (JSON, schema version 1).

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dislocation::{build_1d_nonperiodic, compute_coupling, CouplingMatrices, SlipConfig};
use crate::error::{Error, Result};
use crate::solver::{InitialData, SolverConfig};
use crate::system::{DiagonalSystem, Monomial, StateBox};

pub const SCHEMA_VERSION: u32 = 1;
pub const SEED_ENV: &str = "DIAGHYP_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SystemSpec {
    Burgers,
    Crossing,
    Linear {
        a: Vec<Vec<f64>>,
        #[serde(default, rename = "box")]
        state_box: Option<StateBox>,
    },
    Dislocation {
        slip: SlipConfig,
        #[serde(default, rename = "box")]
        state_box: Option<StateBox>,
    },
    Polynomial {
        components: Vec<Vec<Monomial>>,
        #[serde(rename = "box")]
        state_box: StateBox,
    },
    Advection {
        speeds: Vec<f64>,
        #[serde(default, rename = "box")]
        state_box: Option<StateBox>,
    },
}

fn matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = rows.len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(Error::Config("matrix `a` must be square and nonempty".into()));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

impl SystemSpec {
    pub fn build(&self) -> Result<DiagonalSystem> {
        match self {
            SystemSpec::Burgers => Ok(DiagonalSystem::burgers()),
            SystemSpec::Crossing => Ok(DiagonalSystem::crossing()),
            SystemSpec::Linear { a, state_box } => DiagonalSystem::linear(matrix(a)?, state_box.clone()),
            SystemSpec::Dislocation { slip, state_box } => build_1d_nonperiodic(&compute_coupling(slip)?, state_box.clone()),
            SystemSpec::Polynomial { components, state_box } => {
                DiagonalSystem::polynomial(components.clone(), state_box.clone())
            }
            SystemSpec::Advection { speeds, state_box } => DiagonalSystem::constant_advection(speeds, state_box.clone()),
        }
    }

    pub fn coupling(&self) -> Result<CouplingMatrices> {
        match self {
            SystemSpec::Dislocation { slip, .. } => compute_coupling(slip),
            _ => Err(Error::Config("this subcommand needs a dislocation system".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub eps_list: Option<Vec<f64>>,
    #[serde(default)]
    pub delta_list: Option<Vec<f64>>,
}

fn yes() -> bool {
    true
}

fn default_grid() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSpec {
    #[serde(default = "yes")]
    pub bounds: bool,
    #[serde(default = "yes")]
    pub entropy_budget: bool,
    #[serde(default = "yes")]
    pub llogl: bool,
    #[serde(default = "yes")]
    pub continuity: bool,
    /// Points per axis of the continuity search grid.
    #[serde(default = "default_grid")]
    pub continuity_grid: usize,
    /// Expected outcome of the cone-positivity check; `None` means no
    /// assertion on it.
    #[serde(default)]
    pub expect_h2: Option<bool>,
}

impl Default for DiagnosticsSpec {
    fn default() -> Self {
        Self { bounds: true, entropy_budget: true, llogl: true, continuity: true, continuity_grid: 8, expect_h2: None }
    }
}

fn default_samples() -> usize {
    1000
}

fn default_cells() -> usize {
    256
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormsSpec {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_cells")]
    pub cells: usize,
}

impl Default for NormsSpec {
    fn default() -> Self {
        Self { samples: default_samples(), cells: default_cells() }
    }
}

fn default_output() -> String {
    "out".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub system: SystemSpec,
    #[serde(default)]
    pub initial_data: Option<InitialData>,
    #[serde(default)]
    pub solver: Option<SolverConfig>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub diagnostics: DiagnosticsSpec,
    #[serde(default)]
    pub norms: NormsSpec,
    #[serde(default = "default_output")]
    pub output_dir: String,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {}, expected {SCHEMA_VERSION}",
                cfg.schema_version
            )));
        }
        if let Some(s) = &cfg.solver {
            s.validate()?;
        }
        if let Some(u0) = &cfg.initial_data {
            InitialData::new(u0.profiles.clone())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Applies the seed override from the environment.
    pub fn resolve_seed(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v.trim().parse().map_err(|_| Error::Config(format!("{SEED_ENV} must be an integer, got `{v}`")))?;
        }
        Ok(())
    }

    pub fn initial_data(&self) -> Result<&InitialData> {
        self.initial_data.as_ref().ok_or_else(|| Error::Config("missing `initial_data`".into()))
    }

    pub fn solver(&self) -> Result<&SolverConfig> {
        self.solver.as_ref().ok_or_else(|| Error::Config("missing `solver`".into()))
    }

    pub fn eps_list(&self) -> Result<&[f64]> {
        self.sweep
            .as_ref()
            .and_then(|s| s.eps_list.as_deref())
            .ok_or_else(|| Error::Config("missing `sweep.eps_list`".into()))
    }

    pub fn delta_list(&self) -> Result<&[f64]> {
        self.sweep
            .as_ref()
            .and_then(|s| s.delta_list.as_deref())
            .ok_or_else(|| Error::Config("missing `sweep.delta_list`".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMOKE: &str = r#"{
        "schema_version": 1,
        "system": {"name": "burgers"},
        "initial_data": {"profiles": [{"family": "tanh", "left": -1, "right": 1, "center": 0, "width": 0.5, "radius": 2}]},
        "solver": {"epsilon": 0.05, "dx": 0.02, "t_final": 0.5, "record_every": 0.05}
    }"#;

    #[test]
    fn parses_smoke_config() {
        let cfg = RunConfig::from_json(SMOKE).unwrap();
        assert_eq!(cfg.system.build().unwrap().name(), "burgers");
        assert_eq!(cfg.output_dir, "out");
        assert!(cfg.diagnostics.entropy_budget);
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = SMOKE.replacen("\"schema_version\": 1,", "\"schema_version\": 1, \"colour\": 3,", 1);
        assert!(matches!(RunConfig::from_json(&bad), Err(Error::Config(_))));
        let bad = SMOKE.replace("\"record_every\"", "\"recordevery\"");
        assert!(RunConfig::from_json(&bad).is_err());
    }

    #[test]
    fn rejects_wrong_schema() {
        let bad = SMOKE.replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(RunConfig::from_json(&bad).is_err());
    }

    #[test]
    fn linear_system_spec() {
        let s: SystemSpec = serde_json::from_str(r#"{"name": "linear", "a": [[0, -1], [0, 0]]}"#).unwrap();
        let sys = s.build().unwrap();
        assert_eq!(sys.dim(), 2);
        assert!(serde_json::from_str::<SystemSpec>(r#"{"name": "linear", "a": [[0, -1]]}"#).unwrap().build().is_err());
    }
}
