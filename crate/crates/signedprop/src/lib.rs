//! File formats, experiment drivers and the `signedprop` command line.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod report;

pub use error::{CliError, Result};
