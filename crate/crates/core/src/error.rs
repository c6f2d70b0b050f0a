use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument outside the domain of the model.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid scenario or experiment configuration; `path` names the field.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    /// The resource manager handed back an allocation the protocol cannot execute.
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::Json(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
