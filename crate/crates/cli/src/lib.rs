//! Command-line driver for the valuation marketplace: datasets, corruption
//! benchmarks, metrics and the setup/commit/valuate/open/verify phases.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod metrics;

pub use error::{CliError, Result};
