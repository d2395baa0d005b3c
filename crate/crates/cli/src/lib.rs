//! Library half of the `pal` binary: the run configuration and the
//! subcommand implementations.

pub mod commands;
pub mod config;

pub use config::RunConfig;
