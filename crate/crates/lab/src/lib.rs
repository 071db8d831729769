//! Command line, file formats and parallel Monte Carlo execution for
//! `frontier-core`.

pub mod cli;
pub mod error;
pub mod io;
pub mod runner;

pub use error::{LabError, Result};
