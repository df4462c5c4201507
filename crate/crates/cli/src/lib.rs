//! Command-line front end for the multilayer solver.

pub mod config;
pub mod run;

pub use config::{load, Diagnostic, Mode, Overrides, RunConfig, Severity};
pub use run::{execute, write_outputs, CliError, Table};
