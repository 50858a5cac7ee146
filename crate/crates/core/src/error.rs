use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A ratio whose denominator vanished (trivial mode, no in-plane work).
    #[error("degenerate quotient: {0}")]
    Degenerate(String),

    #[error("empty sample set: {0}")]
    EmptySample(String),

    #[error("missing boundary samples for essential segment `{0}`")]
    MissingBoundary(String),

    #[error("point outside the domain of validity: {0}")]
    OutOfDomain(String),

    #[error("unknown reference case: {0}")]
    UnknownCase(String),

    #[error("checkpoint header mismatch: {0}")]
    HeaderMismatch(String),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("config parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
