use std::fmt;

use rank_phase::RankError;

/// Exit status for a usage, configuration or input error.
pub const EXIT_USAGE: u8 = 2;
/// Exit status for a runtime or verification failure.
pub const EXIT_FAILURE: u8 = 1;

/// A failed command: the message for standard error and the exit status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn failure(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_FAILURE,
            message: message.into(),
        }
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        CliError::failure(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<RankError> for CliError {
    fn from(err: RankError) -> Self {
        let code = match err {
            RankError::Dimension { .. }
            | RankError::Input(_)
            | RankError::TooLarge { .. }
            | RankError::Config { .. } => EXIT_USAGE,
            RankError::Degenerate(_) | RankError::Internal(_) => EXIT_FAILURE,
        };
        CliError {
            code,
            message: err.to_string(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
