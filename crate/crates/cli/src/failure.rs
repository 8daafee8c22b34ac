//! Failure classes and their exit codes.

use std::fmt;

use conformal_qw::Error;

#[derive(Debug)]
pub enum Failure {
    /// A built-in invariant check failed (exit 1).
    Invariant(String),
    /// Unreadable, malformed or out-of-range configuration (exit 2).
    Config(anyhow::Error),
    /// A numerical precondition did not hold (exit 3).
    Numerical(Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Invariant(_) => 1,
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Invariant(msg) => write!(f, "invariant failure: {msg}"),
            Failure::Config(e) => write!(f, "config error: {e:#}"),
            Failure::Numerical(e) => write!(f, "numerical precondition failed: {e}"),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Config(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidGrid(_) | Error::InvalidParameter(_) | Error::GridMismatch(_) | Error::Table(_) => {
                Failure::Config(e.into())
            }
            other => Failure::Numerical(other),
        }
    }
}

pub type Outcome<T = ()> = Result<T, Failure>;
