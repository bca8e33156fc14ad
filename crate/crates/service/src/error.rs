use thiserror::Error;
use wallfilter_core::{CorpusError, EvalError, ModelError, PolicyError};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("wall {0:?} not found")]
    WallNotFound(String),
    #[error("wall {0:?} already exists")]
    WallExists(String),
    #[error("message {0:?} not found")]
    MessageNotFound(String),
    #[error("message {0:?} is not pending review")]
    NotPending(String),
    #[error("message {0:?} is not published")]
    NotPublished(String),
    #[error("user {0:?} not found")]
    UserNotFound(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    InvalidPolicy(#[from] PolicyError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("event log: {0}")]
    Log(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl ServiceError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        ServiceError::Io {
            context: context.into(),
            source,
        }
    }

    /// Stable machine-readable code used in HTTP error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::WallNotFound(_) => "wall_not_found",
            ServiceError::WallExists(_) => "wall_exists",
            ServiceError::MessageNotFound(_) => "message_not_found",
            ServiceError::NotPending(_) => "not_pending",
            ServiceError::NotPublished(_) => "not_published",
            ServiceError::UserNotFound(_) => "user_not_found",
            ServiceError::InvalidInput(_) => "invalid_input",
            ServiceError::InvalidPolicy(_) => "invalid_policy",
            ServiceError::Corpus(_) => "corpus_error",
            ServiceError::Model(_) => "model_error",
            ServiceError::Eval(_) => "eval_error",
            ServiceError::Config(_) => "config_error",
            ServiceError::Log(_) => "event_log_error",
            ServiceError::Io { .. } => "io_error",
        }
    }
}
