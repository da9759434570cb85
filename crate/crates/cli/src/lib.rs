//! Experiment driver for `spinwire-core`: TOML configuration, parallel
//! ensemble execution, CSV/JSON result tables and fit reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod executor;
pub mod table;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
pub use executor::ParallelExecutor;
