use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CutsError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CutsError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(String),

    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl CutsError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CutsError::Io { path: path.into(), source }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        CutsError::Json { path: path.into(), source }
    }

    /// True for failures caused by invalid inputs or settings rather than by
    /// the numerics or the file system.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            CutsError::Config(_)
                | CutsError::Shape(_)
                | CutsError::UndefinedMetric(_)
                | CutsError::Parse { .. }
                | CutsError::Json { .. }
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(self, CutsError::Io { .. })
    }
}
