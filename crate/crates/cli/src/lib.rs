//! Experiment runner for `moprompt-core`: config files, parallel seeds,
//! output files and the `moprompt` command line.

pub mod cli;
pub mod config;
mod error;
pub mod output;
pub mod run;

pub use error::{exit, CliError, CliResult};
