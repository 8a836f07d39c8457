//! Experiment configuration (TOML, schema version 1).

use std::path::{Path, PathBuf};

use easi::{ConvergenceCriterion, Hyperparameters, Nonlinearity, Optimizer, Schedule, SourceSpec};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CONFIG_VERSION: u32 = 1;

/// Annotated default configuration, printed by `--print-default-config`.
pub const DEFAULT_CONFIG: &str = include_str!("default_config.toml");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: Box<toml::de::Error>,
    },
    #[error("invalid config field `{field}`: {message}")]
    Field { field: String, message: String },
}

fn field_error(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Field { field: field.into(), message: message.into() }
}

/// Seeds as an explicit list or a count `n` meaning `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    Count(u64),
    List(Vec<u64>),
}

impl Seeds {
    pub fn to_vec(&self) -> Vec<u64> {
        match self {
            Seeds::Count(n) => (0..*n).collect(),
            Seeds::List(list) => list.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureConfig {
    /// Observed dimensions; the number of sources gives `n`.
    pub m: usize,
    pub sources: Vec<SourceSpec>,
    #[serde(default)]
    pub schedule: Schedule,
}

impl Default for MixtureConfig {
    fn default() -> Self {
        Self { m: 4, sources: vec![SourceSpec::Uniform; 2], schedule: Schedule::Stationary }
    }
}

/// One optimizer arm of a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub optimizer: Optimizer,
    #[serde(default = "defaults::mu")]
    pub mu: f64,
    #[serde(default = "defaults::beta")]
    pub beta: f64,
    #[serde(default = "defaults::gamma")]
    pub gamma: f64,
    #[serde(default = "defaults::batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub nonlinearity: Nonlinearity,
}

mod defaults {
    use easi::Hyperparameters;

    pub fn mu() -> f64 {
        Hyperparameters::default().mu
    }
    pub fn beta() -> f64 {
        Hyperparameters::default().beta
    }
    pub fn gamma() -> f64 {
        Hyperparameters::default().gamma
    }
    pub fn batch_size() -> usize {
        Hyperparameters::default().batch_size
    }
    pub fn stride() -> usize {
        10
    }
}

impl ArmConfig {
    pub fn from_hyper(hyper: Hyperparameters) -> Self {
        Self {
            name: None,
            optimizer: hyper.optimizer,
            mu: hyper.mu,
            beta: hyper.beta,
            gamma: hyper.gamma,
            batch_size: hyper.batch_size,
            nonlinearity: hyper.nonlinearity,
        }
    }

    pub fn default_for(optimizer: Optimizer) -> Self {
        Self::from_hyper(Hyperparameters::with_optimizer(optimizer))
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.optimizer.name().to_string())
    }

    pub fn hyper(&self) -> Hyperparameters {
        Hyperparameters {
            mu: self.mu,
            beta: self.beta,
            gamma: self.gamma,
            batch_size: self.batch_size,
            optimizer: self.optimizer,
            nonlinearity: self.nonlinearity,
        }
    }
}

/// Hyperparameter grid explored by the `sweep` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "sweep_defaults::optimizer")]
    pub optimizer: Optimizer,
    pub mu: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub batch_size: Vec<usize>,
    /// Fraction of seeds that must converge for a grid point to be eligible as best.
    #[serde(default = "sweep_defaults::min_converged")]
    pub min_converged_fraction: f64,
}

mod sweep_defaults {
    pub fn optimizer() -> easi::Optimizer {
        easi::Optimizer::Smbgd
    }
    pub fn min_converged() -> f64 {
        0.9
    }
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            optimizer: Optimizer::Smbgd,
            mu: vec![0.01],
            beta: vec![0.0, 0.25, 0.5, 0.75, 0.9],
            gamma: vec![0.0, 0.25, 0.5, 0.75, 0.9],
            batch_size: vec![8],
            min_converged_fraction: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub seeds: Seeds,
    pub max_samples: usize,
    /// Keep every `record_stride`-th sample in `runs.csv`.
    #[serde(default = "defaults::stride")]
    pub record_stride: usize,
    /// Stop a run as soon as its convergence window completes.
    #[serde(default)]
    pub stop_at_convergence: bool,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub mixture: MixtureConfig,
    #[serde(default)]
    pub convergence: ConvergenceCriterion,
    pub arms: Vec<ArmConfig>,
    #[serde(default)]
    pub sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seeds: Seeds::Count(50),
            max_samples: 50_000,
            record_stride: 10,
            stop_at_convergence: false,
            output_dir: PathBuf::from("results"),
            mixture: MixtureConfig::default(),
            convergence: ConvergenceCriterion::default(),
            arms: vec![ArmConfig::default_for(Optimizer::Sgd), ArmConfig::default_for(Optimizer::Smbgd)],
            sweep: SweepConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text)
            .map_err(|source| ConfigError::Parse { path: origin.to_path_buf(), source: Box::new(source) })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text, path)
    }

    pub fn seed_list(&self) -> Vec<u64> {
        self.seeds.to_vec()
    }

    pub fn n(&self) -> usize {
        self.mixture.sources.len()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != CONFIG_VERSION {
            return Err(field_error(
                "version",
                format!("unsupported version {} (expected {CONFIG_VERSION})", self.version),
            ));
        }
        if self.seed_list().is_empty() {
            return Err(field_error("seeds", "at least one seed is required"));
        }
        if self.mixture.sources.is_empty() {
            return Err(field_error("mixture.sources", "at least one source is required"));
        }
        if self.mixture.m < self.n() {
            return Err(field_error("mixture.m", format!("must be >= number of sources ({})", self.n())));
        }
        if let Schedule::Rotating { rate, plane: (i, j), .. } = self.mixture.schedule {
            if !rate.is_finite() {
                return Err(field_error("mixture.schedule.rate", "must be finite"));
            }
            if i >= self.n() || j >= self.n() || i == j {
                return Err(field_error(
                    "mixture.schedule.plane",
                    format!("needs two distinct source indices below {}", self.n()),
                ));
            }
        }
        self.convergence.validate().map_err(|e| field_error("convergence", e.to_string()))?;
        if self.max_samples < self.convergence.window {
            return Err(field_error(
                "max_samples",
                format!("must be >= convergence.window ({})", self.convergence.window),
            ));
        }
        if self.record_stride == 0 {
            return Err(field_error("record_stride", "must be at least 1"));
        }
        if self.arms.is_empty() {
            return Err(field_error("arms", "at least one arm is required"));
        }
        for (i, arm) in self.arms.iter().enumerate() {
            arm.hyper().validate().map_err(|e| field_error(format!("arms[{i}]"), e.to_string()))?;
        }
        let mut labels: Vec<String> = self.arms.iter().map(ArmConfig::label).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(field_error("arms", "arm names must be unique (set `name` to disambiguate)"));
        }
        self.validate_sweep()
    }

    fn validate_sweep(&self) -> Result<(), ConfigError> {
        let s = &self.sweep;
        for (name, empty) in [
            ("sweep.mu", s.mu.is_empty()),
            ("sweep.beta", s.beta.is_empty()),
            ("sweep.gamma", s.gamma.is_empty()),
            ("sweep.batch_size", s.batch_size.is_empty()),
        ] {
            if empty {
                return Err(field_error(name, "grid axis must not be empty"));
            }
        }
        if !(0.0..=1.0).contains(&s.min_converged_fraction) {
            return Err(field_error("sweep.min_converged_fraction", "must lie in [0, 1]"));
        }
        for hyper in crate::sweep::grid(s) {
            hyper.validate().map_err(|e| field_error("sweep", e.to_string()))?;
        }
        Ok(())
    }
}
