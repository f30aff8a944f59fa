//! Config-driven reports for the post-selected PR-box simulator.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{run, Command};
pub use config::{Format, RunConfig};
pub use error::{CliError, CliResult};
