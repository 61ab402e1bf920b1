//! Orchestration layer for the `qrt` binary: configuration, preflight,
//! end-to-end runs and report rendering.

pub mod config;
pub mod preflight;
pub mod report;
pub mod run;

pub use config::{load_config, parse_config, validate, ConfigError, LabConfig};
pub use preflight::{preflight, preflight_with, PreflightReport};
pub use report::{parse_report, render_markdown, LabReport};
pub use run::{run, RunOptions, RunOutcome, EXIT_MISMATCH, EXIT_OK, EXIT_STRUCTURAL};
