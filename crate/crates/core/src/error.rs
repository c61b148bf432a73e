use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid rank {rank} for a {rows}x{cols} matrix")]
    InvalidRank { rank: usize, rows: usize, cols: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("basis is not orthonormal (Gram deviation {0:e})")]
    InvalidBasis(f64),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("restricted operator is not invertible (condition number {0:e})")]
    NotInvertible(f64),

    #[error("inconsistent observation at ({i}, {j}): {first} vs {second}")]
    InconsistentObservation {
        i: usize,
        j: usize,
        first: f64,
        second: f64,
    },

    #[error("infeasible system: {0}")]
    Infeasible(String),

    #[error("numerical degeneracy: {0}")]
    Degenerate(String),

    #[error("unsupported topology: {0}")]
    Topology(String),

    #[error("power flow has no solution (residual {residual:e} after {iterations} iterations)")]
    NoSolution { residual: f64, iterations: usize },

    #[error("power-flow solution is not converged")]
    StaleSolution,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
