//! Experiment harness: JSON configs in, CSV tables and PGM images out.

pub mod cli;
pub mod config;
pub mod experiments;

pub use config::{ExperimentConfig, ExperimentKind};
