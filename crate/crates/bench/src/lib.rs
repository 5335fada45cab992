//! Experiment runner for the LOCO library: configuration files, metrics,
//! grid execution with per-seed and aggregate records, and quick checks.

pub mod checks;
pub mod config;
pub mod metrics;
pub mod output;
pub mod runner;

pub use config::ExperimentConfig;
pub use runner::{run_experiment, MetricsRecord, RunOptions};
