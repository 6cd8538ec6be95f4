//! File formats, configuration, and command implementations behind the `nlmi`
//! binary.
//!
//! Everything here is a thin, deterministic layer over [`nlmi_core`]: TOML run
//! configuration, CSV scan files with self-describing header comments,
//! key=value plus JSON result files, and the benchmark replication harness.

pub mod commands;
pub mod config;
pub mod error;
pub mod files;
pub mod replicate;

pub use error::{CliError, ExitCode};
