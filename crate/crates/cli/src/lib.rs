//! Config-driven experiment runner built on `shubin-core`.

pub mod config;
pub mod runner;

pub use config::{ConfigError, ExperimentConfig, ExperimentKind};
pub use runner::{run, RunError, RunOutcome};
