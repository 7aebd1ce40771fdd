use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("unsupported or malformed image: {0}")]
    Format(String),
    #[error("invalid noise specification: {0}")]
    InvalidSpec(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable category tag.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::Format(_) => "format",
            Error::InvalidSpec(_) => "spec",
            Error::Numeric(_) => "numeric",
            Error::Config(_) => "config",
            Error::Checkpoint(_) => "checkpoint",
            Error::Io(_) => "io",
        }
    }

    /// The message without the category wording.
    pub fn message(&self) -> String {
        match self {
            Error::Dimension(m)
            | Error::Format(m)
            | Error::InvalidSpec(m)
            | Error::Numeric(m)
            | Error::Config(m)
            | Error::Checkpoint(m) => m.clone(),
            Error::Io(e) => e.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
