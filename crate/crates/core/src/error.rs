use thiserror::Error;

use crate::subgoal::FieldError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A map, series or run configuration is malformed or inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// A map document failed to load; `location` names the offending field or position.
    #[error("map load error at {location}: {message}")]
    MapLoad { location: String, message: String },

    /// An operation was called outside its contract (e.g. stepping a finished episode).
    #[error("usage error: {0}")]
    Usage(String),

    /// Simulator state violated an invariant that should be unreachable.
    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("generation error: {0}")]
    Generation(String),

    /// A document failed field-level validation.
    #[error("invalid configuration: {}", summarize(.0))]
    Invalid(Vec<FieldError>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn map(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::MapLoad {
            location: location.into(),
            message: message.into(),
        }
    }
}

fn summarize(errors: &[FieldError]) -> String {
    errors
        .iter()
        .map(|e| format!("{}: {}", e.field, e.message))
        .collect::<Vec<_>>()
        .join("; ")
}
