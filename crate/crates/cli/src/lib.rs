//! Command-line front end for `spde-bridge-core`: TOML experiment configs,
//! parallel drivers, deterministic CSV outputs and JSON run manifests.

pub mod commands;
pub mod config;
pub mod error;
pub mod expr;
pub mod manifest;
pub mod output;
pub mod parallel;
pub mod validate;

pub use commands::{run, Command, RunOptions, RunSummary};
pub use config::{Experiment, ExperimentConfig};
pub use error::{CliError, Result};
