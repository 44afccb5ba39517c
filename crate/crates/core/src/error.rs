use thiserror::Error;

/// Failure modes shared by every solver in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(String),
    #[error("non-finite sample at node {index}")]
    NonFiniteSample { index: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no shooting bracket found for lambda = {lambda} in a in [{a_min:e}, {a_max:e}]")]
    NoBracket { lambda: f64, a_min: f64, a_max: f64 },
    #[error("no s with H(s) > 0 at lambda = {0}")]
    NoPositiveH(f64),
    #[error("min of a1(lambda) - e^lambda m / 2 is nonnegative over the scanned range (m = {0})")]
    NegativeNotFound(f64),
    #[error("endpoint verdicts agree ({0}); no threshold inside the bracket")]
    BadBracket(String),
    #[error("descent did not converge: {0}")]
    NonConverged(String),
    #[error("config error at {path}: {msg}")]
    Config { path: String, msg: String },
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
