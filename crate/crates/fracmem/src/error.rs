//! Crate-wide error type.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A precondition on an argument was violated.
    InvalidArgument(String),
    /// A numerical operation broke down (singular matrix, NaN, divergence).
    NumericFailure(String),
    /// Armijo backtracking exhausted its budget without sufficient decrease.
    LineSearchFailure { backtracks: usize },
    /// Malformed or unknown configuration input.
    Config(String),
    /// Filesystem problem while writing run outputs (message keeps the path).
    Io(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::NumericFailure(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Short stable tag used in machine-readable CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::NumericFailure(_) => "numeric-failure",
            Error::LineSearchFailure { .. } => "line-search-failure",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(m) => write!(f, "invalid argument: {m}"),
            Error::NumericFailure(m) => write!(f, "numeric failure: {m}"),
            Error::LineSearchFailure { backtracks } => {
                write!(f, "line search failed after {backtracks} backtracks")
            }
            Error::Config(m) => write!(f, "config error: {m}"),
            Error::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
