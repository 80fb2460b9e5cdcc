//! Configuration handling and subcommands behind the `basketopt` binary.

pub mod commands;
pub mod config;

pub use commands::{exit_code, run, Command};
pub use config::{load, parse_str, Overrides, Phi, RunConfig};
