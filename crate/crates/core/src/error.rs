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

    #[error("nodes referenced by the edge file are missing from the attribute file: {0:?}")]
    MissingNodes(Vec<u64>),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid crawl data: {0}")]
    Data(String),

    #[error("no labeled giant component")]
    NoLabeledComponent,

    #[error("absorbing seed set: no edges leave the seed nodes")]
    AbsorbingSeedSet,

    #[error("SGD diverged at step {step} (learning rate {rate:.3e}, weight norm {norm:.3e})")]
    Diverged { step: usize, rate: f64, norm: f64 },

    #[error("{failed} of {total} bootstrap replicates failed")]
    BootstrapFailed { failed: usize, total: usize },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
