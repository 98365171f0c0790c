use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("size cap exceeded: {0}")]
    SizeCap(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unknown family `{0}`")]
    UnknownFamily(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("support violation: {0}")]
    SupportViolation(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("conditioning on a null event: {0}")]
    NullEvent(String),
    #[error("malformed protocol tree: {0}")]
    MalformedTree(String),
    #[error("linear program: {0}")]
    Lp(String),
    #[error("extraction failed: {0}")]
    Extraction(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
