use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("classes live on different geometries: {0} vs {1}")]
    MixedGeometry(String, String),
    #[error("input error: {0}")]
    Input(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Positioned {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported expression: {0}")]
    Unsupported(String),
    #[error("Serre construction for {name} refused: h^2(det*) {reason}")]
    SerreObstructed { name: String, reason: String },
    #[error("contradiction on {fact}: {first} vs {second}")]
    Contradiction {
        fact: String,
        first: String,
        second: String,
    },
    #[error("undetermined: {0}")]
    Undetermined(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
