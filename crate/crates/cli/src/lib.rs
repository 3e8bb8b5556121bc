//! Experiment runner for the `vps` binary: configuration, campaign execution, manifests and
//! plot data.

pub mod config;
pub mod error;
pub mod experiment;
pub mod manifest;
pub mod plot;

pub use error::{CliError, CliResult};
