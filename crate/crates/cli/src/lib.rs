//! Sweep harness behind the `scatbound` binary: configuration, the cell
//! pool, the per-command CSV writers, certificate verification and the
//! validation suite.

pub mod commands;
pub mod config;
pub mod output;
pub mod sweep;
pub mod validate;
pub mod verify;

pub use commands::{cmd_alpha, cmd_bound, cmd_dual_at_alpha, cmd_localopt, CommandSummary};
pub use config::{AlphaMode, Overrides, Profile, SweepConfig};
pub use validate::{cmd_validate, ValidationReport};
pub use verify::{cmd_verify, VerifySummary};
