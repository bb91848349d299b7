//! Front end for the `dotbench-core` experiments: JSON configs in, JSON, CSV
//! and SVG artifacts out.

pub mod commands;
pub mod config;
pub mod defaults;
pub mod error;
pub mod svg;

pub use commands::{run, Command, Overrides, RunConfig};
pub use error::{CliError, CliResult};
