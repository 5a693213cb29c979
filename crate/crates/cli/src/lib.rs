//! Batch front end: release plans, panel CSVs, per-period anonymization and
//! ledger reports.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod error;
pub mod protect;
pub mod verify;

pub use config::ReleasePlanConfig;
pub use error::CliError;
pub use protect::{protect, ProtectReport};
