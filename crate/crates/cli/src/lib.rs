//! Batch driver for the insulation solvers: configuration, runs and output
//! files (summary, legacy VTK, CSV tables, replayable manifest).

pub mod config;
pub mod error;
pub mod output;
pub mod run;
pub mod vtk;

pub use config::RunConfig;
pub use error::{CliError, Result};
pub use run::run;
