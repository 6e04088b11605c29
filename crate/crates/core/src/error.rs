use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("dimension mismatch in {context}: {msg}")]
    Dimension { context: &'static str, msg: String },

    #[error("label error: {0}")]
    Label(String),

    #[error("domain error in {context}: {msg}")]
    Domain { context: &'static str, msg: String },

    #[error("config error for `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("numeric abort: {0}")]
    Numeric(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(context: &'static str, msg: impl Into<String>) -> Self {
        Error::Dimension {
            context,
            msg: msg.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }

    /// Process exit code for the command-line front end:
    /// 2 config, 3 data, 4 numeric abort, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 2,
            Error::Parse { .. }
            | Error::Label(_)
            | Error::Data(_)
            | Error::Io(_)
            | Error::Json(_) => 3,
            Error::Dimension { .. } => 3,
            Error::Numeric(_) | Error::Domain { .. } => 4,
            Error::Contract(_) => 1,
        }
    }
}
