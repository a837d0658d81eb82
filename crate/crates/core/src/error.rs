use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the pipeline can report.
///
/// Variants split into two families for exit-code purposes: IO and transport
/// problems (the environment failed us) and everything else (the inputs
/// violate a contract).
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("segmentation error at line {line}: {message}")]
    Segmentation { line: usize, message: String },

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("template error in {file}: {message}")]
    Template { file: String, message: String },

    #[error("contract error: {0}")]
    Contract(String),

    #[error("capacity error: prompt estimated at {estimate} tokens exceeds the {limit}-token context window of {model}")]
    Capacity {
        model: String,
        estimate: usize,
        limit: usize,
    },

    #[error("transport error: {0}")]
    Transport(String),

    #[error("assignment error: {tool} is not assigned to {smell}")]
    Assignment { tool: String, smell: String },

    #[error("parse error in {source_name} line {line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("coverage error: {0}")]
    Coverage(String),

    #[error("completeness error: missing verdict from {0}")]
    Completeness(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for IO/transport failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Transport(_) => 2,
            _ => 1,
        }
    }

    /// Short machine-readable tag used in the CLI's stderr summary.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Validation(_) => "validation",
            Error::Segmentation { .. } => "segmentation",
            Error::Resolution(_) => "resolution",
            Error::Template { .. } => "template",
            Error::Contract(_) => "contract",
            Error::Capacity { .. } => "capacity",
            Error::Transport(_) => "transport",
            Error::Assignment { .. } => "assignment",
            Error::Parse { .. } => "parse",
            Error::Coverage(_) => "coverage",
            Error::Completeness(_) => "completeness",
            Error::Alignment(_) => "alignment",
            Error::Usage(_) => "usage",
            Error::Io { .. } => "io",
        }
    }
}
