//! Command-line front end: device ingestion, characterization, simulation
//! runs and plot-data sweeps.

pub mod commands;
pub mod config;
pub mod device;
pub mod error;
pub mod manifest;
pub mod report;

pub use error::{CliError, CliResult};
