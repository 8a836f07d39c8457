//! Experiment harness for the `easi` crate.
//!
//! Runs seed-swept optimizer comparisons, hyperparameter sweeps and the pipeline
//! throughput table, and writes CSV and SVG artifacts.

pub mod config;
pub mod experiment;
pub mod output;
pub mod plot;
pub mod sweep;
pub mod table1;

pub use config::{ArmConfig, ConfigError, ExperimentConfig, Seeds};
pub use experiment::{run_experiment, run_single, ComparisonSummary, Experiment};
