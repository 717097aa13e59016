use thiserror::Error;

/// Errors surfaced by the library. The CLI maps each variant to a distinct
/// nonzero exit code.
#[derive(Debug, Error)]
pub enum Error {
    /// Structurally invalid configuration (bad shapes, missing fields).
    #[error("config: {0}")]
    Config(String),
    /// Failed to parse an input file.
    #[error("parse: {0}")]
    Parse(String),
    /// A value violates a documented invariant.
    #[error("validation: {0}")]
    Validation(String),
    /// Mathematically invalid argument (negative concentration, i = k, ...).
    #[error("domain: {0}")]
    Domain(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
