use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("universe deficit: need {need}, have {have}")]
    UniverseDeficit { need: usize, have: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("unknown series: {0}")]
    UnknownSeries(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("upstream stage `{0}` is incomplete; run it first")]
    IncompleteUpstream(String),

    #[error("{}: existing file differs from what this stage would write; re-run with --force to overwrite", .0.display())]
    ForceRequired(PathBuf),

    #[error("I/O error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("decode error in {}: {message}", path.display())]
    Decode { path: PathBuf, message: String },
}

impl Error {
    pub fn io(path: impl AsRef<Path>, source: io::Error) -> Self {
        Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn decode(path: impl AsRef<Path>, message: impl ToString) -> Self {
        Error::Decode {
            path: path.as_ref().to_path_buf(),
            message: message.to_string(),
        }
    }

    /// Process exit code for the CLI: 1 validation/config, 2 incomplete upstream, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::IncompleteUpstream(_) => 2,
            Error::Io { .. } | Error::Decode { .. } => 3,
            _ => 1,
        }
    }
}
