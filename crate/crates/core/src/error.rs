use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    Dimension {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("unknown system `{0}`")]
    UnknownSystem(String),

    #[error("unknown coordinate `{name}` for system `{system}`")]
    UnknownCoordinate { system: String, name: String },

    #[error("parameter `{0}` has no default and was not supplied")]
    MissingParameter(String),

    #[error("numerical blowup: non-finite value while evaluating {0}")]
    Blowup(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}
