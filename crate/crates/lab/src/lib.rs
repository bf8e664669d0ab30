//! Parallel drivers, output formats, configuration and the `rwrs` command line.

pub mod cli;
pub mod config;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod format;

pub use error::{LabError, Result};
pub use exec::Parallel;
