use alloc::string::String;

/// Errors produced by the reward, labeling and learning machinery.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("could not parse response: {raw:?}")]
    Parse { raw: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("non-finite value in {0}")]
    Numeric(String),
    /// Training diverged; carries a description of the offending update.
    #[error("run aborted: {0}")]
    AbortRun(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
