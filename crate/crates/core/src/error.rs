use thiserror::Error;

/// Errors raised by evaluation, parsing and verification routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A document did not match its schema. `path` points into the document.
    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },

    /// An enumeration would exceed its configured size bound.
    #[error("budget exceeded: {what} needs {needed} but the budget is {budget}")]
    Budget {
        what: String,
        needed: u128,
        budget: u128,
    },

    /// A monotone sequence produced a trace that moved the wrong way.
    #[error("non-monotone trace at n={n}: {previous} then {current}")]
    NonMonotone {
        n: usize,
        previous: String,
        current: String,
    },

    /// Two routes that must agree did not.
    #[error("consistency failure: {0}")]
    Consistency(String),

    /// A certificate was requested for a process that is not a supermartingale.
    #[error("not a supermartingale: {violations} violating situation(s), first at {first}")]
    NotSupermartingale { violations: usize, first: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn parse(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn contract(message: impl Into<String>) -> Self {
        Error::Contract(message.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
