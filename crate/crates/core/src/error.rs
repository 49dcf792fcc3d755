use std::path::PathBuf;

use crate::reconstruct::TraceRecord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used for process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Parameter,
    Numerical,
    Io,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Parameter => 1,
            ErrorKind::Numerical => 2,
            ErrorKind::Io => 3,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("integration became unstable at step {step}: {detail}")]
    Unstable { step: usize, detail: String },

    #[error("reconstruction failed: {reason}")]
    Reconstruction {
        reason: String,
        trace: Box<Vec<TraceRecord>>,
    },

    #[error("malformed input{}: {detail}", location(.path, .line))]
    Parse {
        path: Option<PathBuf>,
        line: Option<usize>,
        detail: String,
    },

    #[error("I/O error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn location(path: &Option<PathBuf>, line: &Option<usize>) -> String {
    match (path, line) {
        (Some(p), Some(l)) => format!(" in {}:{l}", p.display()),
        (Some(p), None) => format!(" in {}", p.display()),
        (None, Some(l)) => format!(" at line {l}"),
        (None, None) => String::new(),
    }
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn parse(line: Option<usize>, detail: impl Into<String>) -> Self {
        Error::Parse {
            path: None,
            line,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach a file path to a parse error produced by an in-memory reader.
    pub(crate) fn at_path(self, p: impl Into<PathBuf>) -> Self {
        match self {
            Error::Parse { line, detail, .. } => Error::Parse {
                path: Some(p.into()),
                line,
                detail,
            },
            other => other,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Parameter(_) | Error::Parse { .. } => ErrorKind::Parameter,
            Error::Numerical(_) | Error::Unstable { .. } | Error::Reconstruction { .. } => {
                ErrorKind::Numerical
            }
            Error::Io { .. } => ErrorKind::Io,
        }
    }
}
