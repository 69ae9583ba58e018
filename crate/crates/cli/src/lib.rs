//! Configuration, orchestration and output for `hrru` experiments.
//!
//! The binary is a thin layer over [`config::parse_config`],
//! [`run::execute`] and [`run::write_artifacts`]; tests drive the same
//! functions directly.

pub mod config;
pub mod output;
pub mod run;

pub use config::{parse_config, ConfigError, ExperimentConfig, ExperimentKind};
pub use run::{execute, write_artifacts, Artifact, RunError, RunOptions};
