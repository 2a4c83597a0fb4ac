use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Malformed or inconsistent arguments (shapes, non-finite values, bad weights).
    InvalidInput(String),
    /// A numerical routine could not produce a trustworthy answer.
    NumericalFailure(String),
    /// An iterative solver ran out of iterations; carries the last marginal violation.
    NotConverged { iterations: usize, violation: f64 },
    /// The object is not in a state that allows the call (e.g. no fitted map yet).
    InvalidState(String),
    /// The caller's interrupt hook asked the solver to stop.
    Interrupted,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::NumericalFailure(msg) => write!(f, "numerical failure: {msg}"),
            Error::NotConverged {
                iterations,
                violation,
            } => write!(
                f,
                "not converged after {iterations} iterations (marginal violation {violation:e})"
            ),
            Error::InvalidState(msg) => write!(f, "invalid state: {msg}"),
            Error::Interrupted => f.write_str("interrupted"),
        }
    }
}

impl core::error::Error for Error {}

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::error::Error::InvalidInput(alloc::format!($($arg)*))
    };
}

macro_rules! numerical {
    ($($arg:tt)*) => {
        $crate::error::Error::NumericalFailure(alloc::format!($($arg)*))
    };
}

pub(crate) use invalid;
pub(crate) use numerical;
