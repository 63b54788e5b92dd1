//! Run configuration: a single JSON document, unknown keys rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{GridError, GridSpec};
use crate::initial::{InitialCondition, InitialError};
use crate::kernels::{KernelError, KernelSet, KernelTable, DEFAULT_REG_WEIGHT_TOL};
use crate::stepper::StepperConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Initial(#[from] InitialError),
}

fn default_reg_tol() -> f64 {
    DEFAULT_REG_WEIGHT_TOL
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    PowerLawUniform {
        lambda: f64,
        alpha: f64,
        #[serde(default = "default_reg_tol")]
        reg_weight_tol: f64,
    },
    ChengRednerUniform {
        lambda: f64,
        alpha: f64,
        #[serde(default)]
        opt_in: bool,
        #[serde(default = "default_reg_tol")]
        reg_weight_tol: f64,
    },
    Table {
        collision: PathBuf,
        breakage: PathBuf,
        diffusion: PathBuf,
    },
}

impl KernelConfig {
    pub fn power_law(lambda: f64, alpha: f64) -> Self {
        KernelConfig::PowerLawUniform { lambda, alpha, reg_weight_tol: DEFAULT_REG_WEIGHT_TOL }
    }

    /// Builds the kernel set; relative table paths resolve against `base_dir`.
    pub fn build(&self, base_dir: &Path) -> Result<KernelSet, KernelError> {
        match self {
            KernelConfig::PowerLawUniform { lambda, alpha, reg_weight_tol } => {
                Ok(KernelSet::power_law_uniform(*lambda, *alpha)?.with_reg_weight_tol(*reg_weight_tol))
            }
            KernelConfig::ChengRednerUniform { lambda, alpha, opt_in, reg_weight_tol } => {
                Ok(KernelSet::cheng_redner_uniform(*lambda, *alpha, *opt_in)?.with_reg_weight_tol(*reg_weight_tol))
            }
            KernelConfig::Table { collision, breakage, diffusion } => {
                let resolve = |p: &PathBuf| if p.is_relative() { base_dir.join(p) } else { p.clone() };
                let table = KernelTable::load(&resolve(collision), &resolve(breakage), &resolve(diffusion))?;
                KernelSet::from_table(table)
            }
        }
    }
}

/// A `(species, level)` pair for the truncation energy inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyProbe {
    pub species: usize,
    pub level: f64,
}

fn default_cadence() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorConfig {
    /// Steps between monitor samples.
    #[serde(default = "default_cadence")]
    pub cadence: usize,
    #[serde(default)]
    pub tail_levels: Vec<usize>,
    #[serde(default)]
    pub energy: Vec<EnergyProbe>,
    /// Keep every monitored state in memory.
    #[serde(default)]
    pub store_trajectory: bool,
    /// Steps between checkpoint writes (0 = only at the end).
    #[serde(default)]
    pub checkpoint_every: usize,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self { cadence: default_cadence(), tail_levels: Vec::new(), energy: Vec::new(), store_trajectory: false, checkpoint_every: 0 }
    }
}

/// Tolerances of the invariants checked at the end of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// `max_t |M(t) − M(0)| / M(0)`.
    pub mass_drift: f64,
    /// Lower bound on every accepted density.
    pub min_value: f64,
    /// Clipped mass relative to `M(0)`.
    pub clipped_mass: f64,
    /// Allowed relative decrease of the zeroth moment between samples.
    pub moment0_decrease: f64,
    /// Energy slack must satisfy `RHS − LHS ≥ −energy_slack·RHS`.
    pub energy_slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { mass_drift: 1e-10, min_value: -1e-12, clipped_mass: 1e-10, moment0_decrease: 1e-10, energy_slack: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub kernel: KernelConfig,
    /// Truncation size.
    pub n: usize,
    /// Regularization parameter.
    pub eps: f64,
    pub grid: GridSpec,
    pub initial: InitialCondition,
    pub stepper: StepperConfig,
    #[serde(default)]
    pub monitors: MonitorConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Set to false for pure diffusion.
    #[serde(default = "default_true")]
    pub reaction: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Only used by randomized property checks.
    #[serde(default)]
    pub seed: u64,
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: SimConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.n == 0 {
            return bad("n must be ≥ 1".into());
        }
        if !self.eps.is_finite() || self.eps < 0.0 {
            return bad(format!("eps must be finite and ≥ 0, got {}", self.eps));
        }
        self.stepper.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.monitors.cadence == 0 {
            return bad("monitors.cadence must be ≥ 1".into());
        }
        for p in &self.monitors.energy {
            if p.species == 0 || p.species > self.n {
                return bad(format!("energy probe species {} outside 1..={}", p.species, self.n));
            }
            if !(p.level > 0.0) {
                return bad(format!("energy probe level must be positive, got {}", p.level));
            }
        }
        if self.monitors.tail_levels.iter().any(|&m| m > self.n) {
            return bad(format!("tail levels must not exceed n = {}", self.n));
        }
        self.initial.validate(&self.grid)?;
        Ok(())
    }
}
