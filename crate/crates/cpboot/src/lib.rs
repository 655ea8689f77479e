//! File formats, configuration, sweeps and the command-line runner on top of
//! `cpboot-core`.

pub mod config;
pub mod error;
pub mod report;
pub mod run;
pub mod sdpa;
pub mod sweep;

pub use cpboot_core as core;
pub use error::{CliError, ExitKind};
