use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("argument {name} = {value} outside domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("index {index} out of range (available: {len})")]
    Index { index: usize, len: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("Legendre cutoff inadequate: trailing coefficient ratio {ratio:e} for mode {mode} at cutoff {cutoff}")]
    Cutoff { mode: usize, cutoff: usize, ratio: f64 },

    #[error("expected {expected} real roots in [-1, 1], found {found}: {diagnostic}")]
    RootCount {
        expected: usize,
        found: usize,
        diagnostic: String,
    },

    #[error("singular system (condition estimate {condition:e}): {context}")]
    Singular { condition: f64, context: String },

    #[error("overflow evaluating {0}")]
    Overflow(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
