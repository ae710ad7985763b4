//! Configuration loading, run orchestration and file output for the
//! `simulate` command.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::{load_config, parse_config, LoadedConfig, Mode, RunConfig};
pub use error::{CliError, CliResult};
pub use run::{run, RunManifest};

/// Environment variable that overrides the output directory of the config file.
pub const OUT_DIR_ENV: &str = "PUSHSIM_OUT_DIR";
