use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("partition error: {0}")]
    Partition(String),

    #[error("projection onto an empty family of cells")]
    EmptyProjection,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("index out of range: {0}")]
    Range(String),

    #[error("invalid model: {0}")]
    Model(String),

    #[error("operator is not symmetric: c[{i}][{j}] - c[{j}][{i}] = {residual:e}")]
    SymmetryViolation { i: usize, j: usize, residual: f64 },

    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("audit `{name}` failed: {detail}")]
    AuditFailure { name: String, detail: String },
}

pub type Result<T> = core::result::Result<T, Error>;
