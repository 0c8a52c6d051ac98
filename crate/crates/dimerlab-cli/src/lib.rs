//! Configuration, orchestration and reports for the dimerlab experiments.

pub mod config;
pub mod experiments;
pub mod report;

pub use config::{parse_grid, ConfigError, ExperimentConfig, ExperimentId};
pub use experiments::{run, RunError};
pub use report::{render, Format, Report};
