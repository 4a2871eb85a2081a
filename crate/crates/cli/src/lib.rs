//! Command-line front end for `bandit-ae`: JSON configs in, quantile tables
//! out.

pub mod config;
pub mod report;
pub mod run;

pub use config::{ConfigError, Overrides, RunConfig};
pub use run::{execute, run, Command, RunOutput};
