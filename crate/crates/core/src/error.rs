use thiserror::Error;

/// Errors produced by the simulation and reconstruction layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("charges must satisfy |qa| != |qb| (got qa = {qa}, qb = {qb})")]
    EqualCharges { qa: f64, qb: f64 },

    #[error("degenerate pixel: all projection counts are zero")]
    DegeneratePixel,

    #[error("missing data for projection {0}")]
    MissingProjection(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn precondition(msg: impl Into<String>) -> Error {
    Error::Precondition(msg.into())
}
