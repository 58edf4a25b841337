//! Error type shared across the crate.

/// Anything that can go wrong in this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of an operation
    /// (probability out of `[0, 1]`, negative weight, and so on).
    #[error("domain: {0}")]
    Domain(String),

    /// Inputs are individually valid but jointly inconsistent
    /// (mismatched lengths, weight budget violated, no alternatives).
    #[error("contract: {0}")]
    Contract(String),

    /// A requested design has no solution under the given constraints.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// A root or optimum could not be bracketed or refined.
    #[error("solver: {0}")]
    Solver(String),

    /// A TSV input could not be parsed. Lines are 1-based and include the
    /// header.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn infeasible(msg: impl Into<String>) -> Self {
        Error::Infeasible(msg.into())
    }

    pub(crate) fn solver(msg: impl Into<String>) -> Self {
        Error::Solver(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
