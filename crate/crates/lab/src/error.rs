use std::path::PathBuf;

/// Failure classes of the laboratory, each with its own process exit code.
#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("fixture missing or incomplete: {0}")]
    Fixture(String),
    #[error(transparent)]
    Core(#[from] vlreward_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("audit failed: {0}")]
    Audit(String),
}

pub type LabResult<T> = Result<T, LabError>;

impl LabError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        LabError::Format { path: path.into(), msg: msg.into() }
    }

    /// Process exit code; see the README for the table.
    pub fn exit_code(&self) -> i32 {
        use vlreward_core::Error as E;
        match self {
            LabError::Config(_) | LabError::Core(E::InvalidArgument(_)) => 2,
            LabError::Fixture(_) | LabError::Core(E::NotFound(_)) => 3,
            LabError::Core(E::AbortRun(_) | E::Numeric(_)) => 4,
            LabError::Core(E::Transport(_) | E::Parse { .. }) => 5,
            LabError::Io { .. } | LabError::Format { .. } => 6,
            LabError::Audit(_) => 7,
        }
    }
}
