//! Configuration, dispatch and serialization for the `tradeoff-lab` runner.

pub mod config;
pub mod output;
pub mod run;

pub use config::{config_hash, emit, parse_config, parse_str, ConfigError, RunConfig};
pub use run::{run, RunError, RunManifest, RunOptions, RunOutcome, Subcommand};
