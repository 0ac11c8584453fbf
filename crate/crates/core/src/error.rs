use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes or hyperparameters that do not fit together.
    #[error("configuration error: {0}")]
    Config(String),

    /// API misuse, e.g. asking for gradients of a non-scalar node.
    #[error("usage error: {0}")]
    Usage(String),

    /// Input outside an operation's mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate normal: gradient norm {0:e} is below 1e-12")]
    DegenerateNormal(f64),

    /// Malformed or inconsistent dataset, scene, mesh or checkpoint content.
    #[error("data error in {path}: {message}")]
    Data { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// NaN or infinite values during optimization.
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    pub fn data(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Data {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Usage(_) => 2,
            Error::Data { .. } | Error::Io { .. } | Error::Domain(_) => 3,
            Error::Numeric(_) | Error::DegenerateNormal(_) => 4,
        }
    }
}
