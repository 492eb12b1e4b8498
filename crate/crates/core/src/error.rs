use thiserror::Error;

/// Crate-wide error type.
///
/// The CLI maps variants onto exit codes: data problems (malformed or missing
/// input) are distinct from numeric failures (domain violations, failed
/// solves, degenerate chains) so batch callers can tell them apart.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Arguments violate a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// Malformed input data not tied to a particular row.
    #[error("data error: {0}")]
    Data(String),
    /// Malformed input data at a 1-based data row (header excluded).
    #[error("data error in row {row}: {msg}")]
    DataRow { row: usize, msg: String },
    /// Parameters outside a function's mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// A numeric procedure failed (no root, degenerate evidence, ...).
    #[error("numeric error: {0}")]
    Numeric(String),
    /// The Gibbs sampler failed at a specific iteration.
    #[error("gibbs iteration {iter}: {msg}")]
    Gibbs { iter: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
