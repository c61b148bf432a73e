//! Low-rank matrix completion with linear equality constraints, applied to
//! recovering distribution-grid states from partial measurements.

pub mod error;
pub mod linalg;
pub mod powergrid;
pub mod sampling;
pub mod solver;
pub mod subspace;

pub use error::{Error, Result};
