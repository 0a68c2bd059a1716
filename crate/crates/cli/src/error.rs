use thiserror::Error;

/// Failure of a single run, split by the exit status it maps to.
#[derive(Debug, Error)]
pub enum RunError {
    /// Bad configuration or parameters (exit 2).
    #[error("configuration error: {0}")]
    Config(String),
    /// The experiment itself failed (exit 1).
    #[error("experiment failed: {0}")]
    Experiment(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Experiment(_) => 1,
            RunError::Config(_) | RunError::Io { .. } => 2,
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        RunError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

impl From<traplab_core::Error> for RunError {
    fn from(e: traplab_core::Error) -> Self {
        use traplab_core::Error as E;
        match e {
            E::InvalidParameter { .. } | E::DimensionMismatch { .. } | E::Parse(_) | E::ExhaustiveBoundExceeded { .. } => {
                RunError::Config(e.to_string())
            }
            other => RunError::Experiment(other.to_string()),
        }
    }
}
