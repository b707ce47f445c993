//! Experiment harness around `curvmix-core`: JSON configs with command-line
//! overrides, seeded replica fan-out over a worker pool, scaling fits,
//! equilibrium tail tables, and CSV/JSON emission.

pub mod config;
pub mod models;
pub mod output;
pub mod runs;
pub mod stats;

pub use config::{ConfigError, Experiment, ExperimentConfig, ModelKind, Profile};
pub use output::{Report, Summary, Table};
pub use runs::run_experiment;
