//! Library surface of the command-line runner, exposed so integration tests
//! can drive complete scenario runs in-process.

pub mod config;
pub mod scenarios;

pub use config::{from_args, ConfigError, Preset, RunConfig, Scenario};
pub use scenarios::{run, RunError};
