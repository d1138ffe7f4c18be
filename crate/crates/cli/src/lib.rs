//! Command-line front end for `fqr_core`: curve CSV ingestion, fitting,
//! prediction, basis export, simulation studies and synthetic spectra.

pub mod commands;
pub mod model_io;
pub mod outliers;
pub mod synth;
pub mod table;

pub use commands::{run, Cli};
