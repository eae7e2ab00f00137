//! Batch front-end: `key=value` configuration, experiment dispatch, CSV and summary artifacts.
//!
//! Exit codes: 0 all targets pass, 1 a target failed, 2 configuration error,
//! 3 numerical or I/O failure.

pub mod config;
pub mod run;

pub use config::{load, parse_config, ConfigError, ConfigErrors, Experiment, Origin, RunConfig};
pub use run::{run, CliError, RunOutcome, CSV_VERSION};
