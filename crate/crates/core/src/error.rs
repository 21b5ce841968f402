use thiserror::Error;

/// Errors shared by all modules.
///
/// `Capacity` maps to process exit code 2, `Precondition` and
/// `InvalidInput` to 3; see the binary's error handling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
