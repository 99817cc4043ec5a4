//! Batch front end: configuration parsing, numeric tables and command
//! execution for the `sigen` binary.

pub mod config;
pub mod runner;
pub mod table;

pub use config::{parse_config, Command, ConfigError, RunConfig};
pub use runner::{execute, write_outputs, Execution, Report};
pub use table::{Table, TableError};
