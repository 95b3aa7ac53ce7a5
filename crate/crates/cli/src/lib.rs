//! Library side of the `mapletag` command-line tool: configuration handling
//! and one function per subcommand, so that everything the binary does can be
//! driven from tests.

pub mod commands;
pub mod config;

pub use commands::{cmd_analyze, cmd_compare, cmd_evaluate, cmd_predict, cmd_train, TrainSummary};
pub use config::RunConfig;

use std::fmt;
use std::path::PathBuf;

/// Bad flags, configuration or missing required inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// An output file could not be written.
#[derive(Debug)]
pub struct OutputError {
    pub path: PathBuf,
    pub source: mapletag::Error,
}

impl fmt::Display for OutputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cannot write {}: {}", self.path.display(), self.source)
    }
}

impl std::error::Error for OutputError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

/// Process exit code for a failed command: 2 for usage and input errors
/// (including invalid or incompatible data and model files), 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<OutputError>() {
            return 1;
        }
        if cause.is::<UsageError>() || cause.is::<mapletag::Error>() {
            return 2;
        }
    }
    1
}
