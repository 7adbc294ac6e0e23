use std::fmt;

use thiserror::Error;

/// One itemized configuration problem, rendered as `CODE: message`.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Violation {
    pub code: String,
    pub message: String,
}

impl Violation {
    pub fn new(code: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            code: code.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("agent index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("no stabilizing solution: {0}")]
    NoStabilizingSolution(String),

    #[error("infeasible schedule: {0}")]
    InfeasibleSchedule(String),

    #[error("numerical blowup at t = {t}: agent {agent}, {what}")]
    NumericalBlowup { t: f64, agent: usize, what: String },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("{} config violation(s)", .0.len())]
    Config(Vec<Violation>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
