use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Structurally malformed input (missing file, inconsistent indices).
    #[error("format error: {0}")]
    Format(String),

    /// A token that should have been a number was not.
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    /// An operation needs a nonempty structure (edges, cohesive set, dataset).
    #[error("empty input: {0}")]
    Empty(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("training diverged at step {step}: non-finite parameter")]
    Diverged { step: u64 },

    #[error("degenerate fold {fold}: training split has a single class")]
    DegenerateFold { fold: usize },

    /// Pipeline wrapper that tags the stage an error came from.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Process exit code for this error family.
    ///
    /// | code | family |
    /// |------|--------|
    /// | 3 | I/O |
    /// | 4 | format / parse |
    /// | 5 | invalid argument |
    /// | 6 | empty input / degenerate fold |
    /// | 7 | training diverged |
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 3,
            Error::Format(_) | Error::Parse { .. } => 4,
            Error::Argument(_) => 5,
            Error::Empty(_) | Error::DegenerateFold { .. } => 6,
            Error::Diverged { .. } => 7,
            Error::Stage { source, .. } => source.exit_code(),
        }
    }
}
