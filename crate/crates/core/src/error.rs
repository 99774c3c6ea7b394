use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("point ({t}, {x}) lies outside the profile domain: {reason}")]
    Domain { t: f64, x: f64, reason: String },

    #[error("warping function {which} is not positive at ({t}, {x}): value {value}")]
    NonPositive {
        which: &'static str,
        t: f64,
        x: f64,
        value: f64,
    },

    #[error("derivative reconstruction failed: {0}")]
    Reconstruction(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("precondition violated ({condition}): {detail}")]
    Precondition { condition: String, detail: String },

    #[error("root finding failed: {0}")]
    RootFinding(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("infeasible: binding constraint `{constraint}` ({detail})")]
    Infeasible { constraint: String, detail: String },

    #[error("interface mismatch: {0}")]
    InterfaceMismatch(String),

    #[error("graph error: {0}")]
    Graph(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl LabError {
    pub fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        LabError::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub fn precondition(condition: impl Into<String>, detail: impl Into<String>) -> Self {
        LabError::Precondition {
            condition: condition.into(),
            detail: detail.into(),
        }
    }
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
