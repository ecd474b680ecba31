use thiserror::Error;

use crate::report::Report;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown block `{0}`")]
    UnknownBlock(String),
    #[error("unknown point `{0}`")]
    UnknownPoint(String),
    #[error("space mismatch: {0}")]
    SpaceMismatch(String),
    #[error("invalid space: {0}")]
    InvalidSpace(String),
    #[error("invalid subset: {0}")]
    InvalidSubset(String),
    #[error("subset is not closed: {0}")]
    NotClosed(String),
    #[error("subset is not clopen: {0}")]
    NotClopen(String),
    #[error("subset is empty")]
    EmptySubset,
    #[error("reciprocal of a function with a zero value at {0}")]
    ZeroValue(String),
    #[error("invalid measure path: {0}")]
    InvalidPath(String),
    #[error("invalid kernel:\n{0}")]
    InvalidKernel(Report),
    #[error("invalid set map:\n{0}")]
    InvalidSetMap(Report),
    #[error("kernel is not positive")]
    NotPositive,
    #[error("kernel is not unital")]
    NotUnital,
    #[error("threshold {0} is outside (0, 1]")]
    ThresholdOutOfRange(String),
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("instance too large for exhaustive search: {0}")]
    InstanceTooLarge(String),
    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),
    #[error("assertion failed [{clause}]: {detail}")]
    Assertion { clause: String, detail: String },
    #[error("neighbourhood search exhausted bound {bound} at {point}")]
    SearchBoundExceeded { bound: u64, point: String },
    #[error("sequence not covered by the set map: {0}")]
    NotCovered(String),
    #[error("parse error at {line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn assertion(clause: &str, detail: impl Into<String>) -> Error {
    Error::Assertion {
        clause: clause.to_string(),
        detail: detail.into(),
    }
}
