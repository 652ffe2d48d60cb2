use std::fmt;

use thiserror::Error;

/// A single invariant violation found while validating a [`crate::Problem`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub layer: Option<usize>,
    pub group: Option<usize>,
    pub message: String,
}

impl Violation {
    pub(crate) fn problem(message: impl Into<String>) -> Self {
        Self {
            layer: None,
            group: None,
            message: message.into(),
        }
    }

    pub(crate) fn layer(layer: usize, message: impl Into<String>) -> Self {
        Self {
            layer: Some(layer),
            group: None,
            message: message.into(),
        }
    }

    pub(crate) fn group(layer: usize, group: usize, message: impl Into<String>) -> Self {
        Self {
            layer: Some(layer),
            group: Some(group),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.layer, self.group) {
            (Some(m), Some(g)) => write!(f, "layer {m}, group {g}: {}", self.message),
            (Some(m), None) => write!(f, "layer {m}: {}", self.message),
            _ => write!(f, "{}", self.message),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid problem: {}", join_violations(.0))]
    Invalid(Vec<Violation>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("cycle budget of {budget} exceeded; last k = {last_k:?}")]
    CycleBudget { budget: usize, last_k: Vec<f64> },

    #[error("oracle work estimate {size} (lattice points × hypotheses) is above the limit of {limit}")]
    LatticeTooLarge { size: f64, limit: f64 },

    #[error("undefined false discovery proportion in layer {layer}")]
    UndefinedFdp { layer: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
