use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// A computation would exceed its enumeration or memory budget.
    #[error("budget exceeded: {0}")]
    Budget(String),
    /// An internal consistency check failed.
    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! domain {
    ($($arg:tt)*) => { $crate::error::Error::Domain(format!($($arg)*)) };
}

macro_rules! budget {
    ($($arg:tt)*) => { $crate::error::Error::Budget(format!($($arg)*)) };
}

macro_rules! invariant {
    ($($arg:tt)*) => { $crate::error::Error::Invariant(format!($($arg)*)) };
}

pub(crate) use {budget, domain, invariant};
