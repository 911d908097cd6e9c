use thiserror::Error;

use crate::expr::{EvalError, ParseError};

/// Unified error type for the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),

    #[error("evaluation error{}: {source}", slot_suffix(.slot))]
    Eval {
        /// Which field slot was being evaluated, e.g. `F[2][1]`, when known.
        slot: Option<String>,
        source: EvalError,
    },

    #[error("problem definition error: {0}")]
    Problem(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("problem file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("degree undefined on boundary: sample modulus {modulus} below threshold")]
    BoundaryZero { modulus: f64 },

    #[error("refinement failed, possible boundary zero (depth {depth})")]
    RefinementFailed { depth: usize },

    #[error("unsupported dimension {0} for degree computation")]
    UnsupportedDimension(usize),

    #[error("quadrature did not converge within the node cap ({nodes} nodes, est. error {est_error})")]
    QuadratureInconclusive { nodes: usize, est_error: f64 },

    #[error("integration aborted: non-finite state at t = {time}")]
    NonFiniteState { time: f64 },

    #[error("{0}")]
    Precondition(String),
}

impl From<EvalError> for Error {
    fn from(source: EvalError) -> Self {
        Error::Eval { slot: None, source }
    }
}

impl Error {
    /// Attaches a field-slot label to an evaluation error.
    pub(crate) fn in_slot(self, slot: &str) -> Self {
        match self {
            Error::Eval { slot: None, source } => Error::Eval {
                slot: Some(slot.to_string()),
                source,
            },
            other => other,
        }
    }
}

fn slot_suffix(slot: &Option<String>) -> String {
    match slot {
        Some(s) => format!(" in {s}"),
        None => String::new(),
    }
}
