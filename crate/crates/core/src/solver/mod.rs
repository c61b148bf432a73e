//! Affine feasible sets and the nuclear-norm and least-squares completions.

mod affine;
mod nuclear;
mod svt;

pub use affine::{
    assemble_affine, independent_constraints, project_affine, AffineProjector, AffineSystem,
    Entry, LinearConstraint, OBSERVATION_CONFLICT_TOLERANCE, ROW_CONSISTENCY_TOLERANCE,
    ROW_DROP_TOLERANCE,
};
pub use nuclear::{
    exact_recovery, relative_error, solve_least_squares, solve_nuclear, SolverConfig,
    SolverReport, FEASIBILITY_TOLERANCE,
};
pub use svt::svt;
