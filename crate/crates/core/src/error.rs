use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("rank deficient: rank {rank} < {rows} rows")]
    RankDeficient { rank: usize, rows: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("code construction failed: {0}")]
    Construction(String),
    #[error("codebook too large: K = {0} exceeds the limit of 20")]
    CodebookTooLarge(usize),
    #[error("training diverged: {0}")]
    Training(String),
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
