//! Command failures and their exit codes.

use std::fmt;

use uot_align::Error;

#[derive(Debug)]
pub enum Failure {
    /// Bad or unreadable input, invalid configuration. Exit code 2.
    Input(String),
    /// Solver non-convergence or non-finite values. Exit code 3.
    Numerical(String),
    /// Anything else, such as output write failures. Exit code 1.
    Other(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Other(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(m) => write!(f, "input error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
            Failure::Other(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::EpsilonTooSmall { .. } | Error::NonFinite(_) => Failure::Numerical(e.to_string()),
            Error::Io(_) => Failure::Other(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}
