//! Batch front end: flat configs in, CSV rows out.

pub mod config;
pub mod output;
pub mod runner;

pub use config::{parse_config, Command, ConfigError, ExperimentConfig};
pub use output::{read_csv, write_csv, ResultRow};
pub use runner::run;
