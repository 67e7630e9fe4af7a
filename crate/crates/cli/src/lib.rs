//! Scenario parsing and dispatch for the `fekete-field` binary.

pub mod commands;
pub mod params;

pub use commands::{exit_code, run, validate, Command, RunError, RunReport, ScenarioConfig, Status};
pub use params::{Diagnostic, Params};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "FEKETE_FIELD_THREADS";
