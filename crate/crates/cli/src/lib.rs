//! Batch front end: taper construction, simulation, estimation and the
//! acceptance suites.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod validate;

pub use error::{CliError, CliResult};
