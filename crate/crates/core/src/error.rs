use std::path::PathBuf;

use thiserror::Error;

use crate::search_space::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A malformed line in a text input. `line` is 1-based.
    #[error("{}:{line}: {message}", file.display())]
    Parse {
        file: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}:{line}: node index {index} out of range for {num_nodes} nodes", file.display())]
    IndexOutOfRange {
        file: PathBuf,
        line: usize,
        index: usize,
        num_nodes: usize,
    },

    #[error("count mismatch: {0}")]
    Mismatch(String),

    #[error("invalid architecture: {}", join_violations(.0))]
    InvalidArchitecture(Vec<Violation>),

    #[error("no record for dataset {dataset}{}", arch.as_ref().map(|a| format!(" and architecture {a}")).unwrap_or_default())]
    NotFound {
        dataset: String,
        arch: Option<String>,
    },

    #[error("unknown dataset {0}")]
    UnknownDataset(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("refusing lookup on held-out dataset {0} (simulation mode not enabled)")]
    Leakage(String),

    #[error("trainer protocol error: {0}")]
    Protocol(String),

    #[error("trainer failure: {0}")]
    Trainer(String),

    #[error("LLM backend error: {0}")]
    Backend(String),

    #[error("JSON error in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn parse(file: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            message: message.into(),
        }
    }

    /// True for failures caused by an LLM endpoint or an external trainer.
    pub fn is_backend(&self) -> bool {
        matches!(self, Error::Backend(_) | Error::Trainer(_) | Error::Protocol(_))
    }
}
