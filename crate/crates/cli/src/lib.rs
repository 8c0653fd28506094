//! Batch interface to the chamberflow library: JSON group configurations in,
//! CSV tables out.

pub mod commands;
pub mod config;
pub mod format;

pub use commands::{run, Command, Failure, Output};
pub use config::{parse_config, Config};

/// Environment variable holding the default worker thread cap.
pub const THREADS_ENV: &str = "CHAMBERFLOW_THREADS";
