//! Crate-wide error type.

use crate::domain::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("agent list is empty")]
    EmptyAgents,

    #[error("rate vector length {got} does not match agent count {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("negative arrival rate {value} at agent index {index}")]
    NegativeRate { index: usize, value: f64 },

    #[error("non-finite {what}: {value}")]
    NonFinite { what: &'static str, value: f64 },

    #[error("capacity must be finite and positive, got {0}")]
    InvalidCapacity(f64),

    #[error("GPU fraction {0} outside [0, 1]")]
    FractionOutOfRange(f64),

    #[error("allocation sum {sum} exceeds capacity {capacity}")]
    CapacityExceeded { sum: f64, capacity: f64 },

    #[error("system validation failed: {}", format_violations(.0))]
    InvalidSystem(Vec<Violation>),

    #[error("invalid workload trace: {0}")]
    InvalidTrace(String),

    #[error("objective weight {which} is negative: {value}")]
    NegativeWeight { which: &'static str, value: f64 },

    #[error("{0} must not be empty")]
    EmptyInput(&'static str),

    #[error("duplicate policy column: {0}")]
    DuplicatePolicy(String),

    #[error("latency floor fraction {0} outside (0, 1]")]
    InvalidLatencyFloor(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
