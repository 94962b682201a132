//! Experiment runner around `fas-core`: JSON configs in, JSON reports and
//! plot-ready tables out.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{run, CliError, Command};
pub use config::{load, ExperimentConfig};
