use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input at a specific line.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A document or sentence violates a structural invariant.
    #[error("sentence {sentence}: {message}")]
    Validation { sentence: String, message: String },

    /// Arguments or inputs that do not satisfy an operation's preconditions.
    #[error("{0}")]
    InvalidInput(String),

    /// A model could not be used, loaded or stored.
    #[error("model: {0}")]
    Model(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn validation(sentence: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            sentence: sentence.into(),
            message: message.into(),
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
