use thiserror::Error;

/// Errors raised by the library.
///
/// Variants are grouped by who is at fault: `Input` means the caller handed
/// over something outside an operation's domain, `Degenerate` means the data
/// itself does not support the requested fit, and `Config` is reserved for
/// experiment descriptions that fail validation before any work is done.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum RankError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("degenerate fit: {0}")]
    Degenerate(String),

    #[error("brute-force search refused: n = {n} exceeds the limit of {max}")]
    TooLarge { n: usize, max: usize },

    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("internal error: {0}")]
    Internal(String),
}

impl RankError {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        RankError::Input(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        RankError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = RankError> = std::result::Result<T, E>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(RankError::Dimension { expected, got });
    }
    Ok(())
}
