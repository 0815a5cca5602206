use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the meshing, assembly and solver layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("mesh validation failed: {0}")]
    InvalidMesh(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{context} did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NotConverged {
        context: &'static str,
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("zero thickness at boundary vertex {vertex}")]
    ZeroThickness { vertex: usize },

    #[error("invalid threshold bracket [{m_lo}, {m_hi}]: lambda = ({lambda_lo}, {lambda_hi}) must straddle reference {reference}")]
    InvalidBracket {
        m_lo: f64,
        m_hi: f64,
        lambda_lo: f64,
        lambda_hi: f64,
        reference: f64,
    },

    #[error("threshold probe at m = {m} failed after {} samples: {source}", samples.len())]
    ProbeFailed {
        m: f64,
        /// `(m, λ_m)` pairs evaluated before the failure.
        samples: Vec<(f64, f64)>,
        #[source]
        source: Box<Error>,
    },

    #[error("value rises from {value_lo} at m = {m_lo} to {value_hi} at m = {m_hi}; a restart missed the global minimum")]
    NotMonotone {
        m_lo: f64,
        m_hi: f64,
        value_lo: f64,
        value_hi: f64,
    },

    #[error("all {0} restarts failed")]
    AllRestartsFailed(usize),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
