//! Scenario runner, report writer and validation suite for `morphic-core`.
//!
//! The `morphic` binary is a thin wrapper over [`scenarios::run_scenario`],
//! [`suite::run_suite`], [`export::field_to_json`] and
//! [`report::verify_manifest`].

pub mod config;
pub mod error;
pub mod export;
pub mod report;
pub mod scenarios;
pub mod suite;

pub use config::{ScenarioConfig, ScenarioKind};
pub use error::CliError;
pub use report::{Check, Comparator, RunReport};
pub use scenarios::run_scenario;
