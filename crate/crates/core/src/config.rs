//! TOML experiment configuration and the run manifest.
//!
//! ```toml
//! [kernel]
//! name = "linear"
//! params = [1.0]
//!
//! [sim]
//! beta = 100.0            # or beta_grid = [16.0, 64.0, 256.0]
//! T = 1.0
//! n_steps = 512
//! n_particles = 2000
//! seed = 7
//!
//! [init]
//! kind = "gaussian"
//! var_x = 0.5
//! M = 1.0
//!
//! [output]
//! dir = "out"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ensemble::{InitialLaw, SimConfig};
use crate::error::{Error, Result};
use crate::experiments::{NStepsPolicy, StudyConfig};
use crate::kernels::DriftKernel;
use crate::scaling::ScalingMap;

/// Environment variable selecting the worker-thread count.
pub const WORKERS_ENV: &str = "KRAMERS_WORKERS";

/// Which system `simulate` integrates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimTarget {
    #[default]
    SecondOrder,
    Limit,
    /// Both systems on common noise, plus per-particle sup errors.
    Coupled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_grid: Option<Vec<f64>>,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub n_steps: usize,
    pub n_particles: usize,
    pub seed: u64,
    #[serde(default)]
    pub system: SimTarget,
    #[serde(default)]
    pub n_steps_policy: NStepsPolicy,
    /// Also rerun the largest `β` with twice the steps in `converge`.
    #[serde(default)]
    pub grid_check: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

fn default_checkpoints() -> Vec<f64> {
    vec![0.25, 0.5, 1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSection {
    pub gamma: f64,
    /// `β` of the direct run; defaults to `γ²`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: Vec<f64>,
    /// Seed of the direct run; defaults to `sim.seed + 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direct_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kernel: DriftKernel,
    pub sim: SimSection,
    pub init: InitialLaw,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<ScalingSection>,
}

fn config_err(field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        reason: reason.into(),
    }
}

/// Re-labels a parameter error with its path in the config file.
fn in_section(e: Error) -> Error {
    match e {
        Error::Parameter { name, reason } => {
            let field = if name.starts_with("init") || name.starts_with("kernel") {
                name.to_string()
            } else {
                format!("sim.{name}")
            };
            Error::Config { field, reason }
        }
        other => other,
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| config_err("toml", e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(path.display().to_string(), e.to_string()))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every section that is present.
    pub fn validate(&self) -> Result<()> {
        if self.sim.beta.is_none() && self.sim.beta_grid.is_none() {
            return Err(config_err("sim.beta", "one of `beta` or `beta_grid` is required"));
        }
        if self.sim.beta.is_some() {
            self.sim_config()?;
        }
        if self.sim.beta_grid.is_some() {
            let study = self.study_config()?;
            for &b in &study.beta_grid {
                study.sim_config(b).validate().map_err(in_section)?;
            }
        }
        if let Some(s) = &self.scaling {
            self.scaling_setup(s)?;
        }
        Ok(())
    }

    fn base(&self, beta: f64) -> SimConfig {
        SimConfig {
            beta,
            kernel: self.kernel.clone(),
            t_end: self.sim.t_end,
            n_steps: self.sim.n_steps,
            n_particles: self.sim.n_particles,
            init: self.init,
            seed: self.sim.seed,
        }
    }

    /// Single-`β` configuration.
    pub fn sim_config(&self) -> Result<SimConfig> {
        let beta = self
            .sim
            .beta
            .ok_or_else(|| config_err("sim.beta", "required by this subcommand"))?;
        let c = self.base(beta);
        c.validate().map_err(in_section)?;
        Ok(c)
    }

    /// The config's simulation settings at an arbitrary `β`.
    pub fn sim_config_at(&self, beta: f64) -> Result<SimConfig> {
        let c = self.base(beta);
        c.validate().map_err(in_section)?;
        Ok(c)
    }

    /// Every `β` to run: the grid if given, else the single value.
    pub fn betas(&self) -> Vec<f64> {
        match (&self.sim.beta_grid, self.sim.beta) {
            (Some(g), _) => g.clone(),
            (None, Some(b)) => vec![b],
            (None, None) => Vec::new(),
        }
    }

    pub fn study_config(&self) -> Result<StudyConfig> {
        let grid = self
            .sim
            .beta_grid
            .clone()
            .ok_or_else(|| config_err("sim.beta_grid", "required by this subcommand"))?;
        let study = StudyConfig {
            beta_grid: grid,
            base: self.base(1.0),
            n_steps_policy: self.sim.n_steps_policy,
            output_dir: self.output.dir.clone(),
        };
        study.validate().map_err(in_section)?;
        Ok(study)
    }

    pub fn scaling(&self) -> Result<(&ScalingSection, ScalingSetup)> {
        let s = self
            .scaling
            .as_ref()
            .ok_or_else(|| config_err("scaling", "section required by this subcommand"))?;
        Ok((s, self.scaling_setup(s)?))
    }

    fn scaling_setup(&self, s: &ScalingSection) -> Result<ScalingSetup> {
        let map = ScalingMap::new(s.gamma).map_err(|e| config_err("scaling.gamma", e.to_string()))?;
        let beta = s.beta.unwrap_or(map.beta());
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(config_err("scaling.beta", format!("must be finite and > 0, got {beta}")));
        }
        if s.checkpoints.is_empty() {
            return Err(config_err("scaling.checkpoints", "need at least one checkpoint"));
        }
        if let Some(t) = s.checkpoints.iter().find(|t| !(**t >= 0.0 && **t <= self.sim.t_end)) {
            return Err(config_err("scaling.checkpoints", format!("{t} is outside [0, T]")));
        }
        let unscaled = self.base(map.beta());
        // the unscaled horizon is γT, so its step is γ times larger
        SimConfig {
            t_end: map.gamma() * unscaled.t_end,
            ..unscaled.clone()
        }
        .validate()
        .map_err(in_section)?;
        let direct = SimConfig {
            beta,
            init: map.scaled_initial_law(&self.init),
            seed: s.direct_seed.unwrap_or(self.sim.seed.wrapping_add(1)),
            ..unscaled.clone()
        };
        direct.validate().map_err(in_section)?;
        Ok(ScalingSetup { map, unscaled, direct })
    }
}

/// Inputs of a scaling check.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingSetup {
    pub map: ScalingMap,
    /// Base for the unscaled run; `t_end` is `T′`.
    pub unscaled: SimConfig,
    pub direct: SimConfig,
}

/// Worker count from [`WORKERS_ENV`], if set.
pub fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(None),
        Ok(s) => s
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| config_err(WORKERS_ENV, format!("expected a positive integer, got `{s}`"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub seed: u64,
    pub workers: Option<usize>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub outputs: Vec<PathBuf>,
    pub passed: bool,
    pub config: ExperimentConfig,
}

pub fn unix_now() -> f64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}
