use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{frobenius, nuclear_norm, Matrix};
use crate::solver::affine::AffineSystem;
use crate::solver::svt::svt;

/// Feasibility residual required of a converged solution.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub rho: f64,
    pub max_iterations: usize,
    pub primal_tolerance: f64,
    pub dual_tolerance: f64,
    /// Relative Frobenius error at which a recovery counts as exact.
    pub exactness_tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rho: 1.0,
            max_iterations: 5000,
            primal_tolerance: 1e-7,
            dual_tolerance: 1e-7,
            exactness_tolerance: 1e-3,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rho", self.rho),
            ("primal_tolerance", self.primal_tolerance),
            ("dual_tolerance", self.dual_tolerance),
            ("exactness_tolerance", self.exactness_tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::input(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_iterations == 0 {
            return Err(Error::input("max_iterations must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverReport {
    #[serde(skip)]
    pub solution: Matrix,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Nuclear norm for [`solve_nuclear`], Frobenius norm for the least-squares
    /// baseline.
    pub objective: f64,
    pub feasibility_residual: f64,
    pub converged: bool,
    /// General constraints discarded as dependent during factorization.
    pub dropped_constraints: usize,
}

/// Minimizes `‖X‖_*` over the affine set by ADMM on the split `X = Z`:
///
/// ```text
/// X ← svt(Z − U, 1/ρ)
/// Z ← Π(X + U)
/// U ← U + X − Z
/// ```
///
/// `Z` starts at the least-squares point and is always feasible, so the
/// returned solution is feasible even when the iteration stops early.
pub fn solve_nuclear(sys: &AffineSystem, config: &SolverConfig) -> Result<SolverReport> {
    config.validate()?;
    let projector = sys.projector()?;
    let (n1, n2) = sys.shape();
    let tau = 1.0 / config.rho;

    let mut z = projector.apply(&Matrix::zeros(n1, n2));
    let mut u = Matrix::zeros(n1, n2);
    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iterations {
        iterations += 1;
        let x = svt(&(&z - &u), tau);
        let z_next = projector.apply(&(&x + &u));
        let gap = &x - &z_next;
        primal = frobenius(&gap);
        dual = config.rho * frobenius(&(&z_next - &z));
        u += gap;
        z = z_next;
        if primal <= config.primal_tolerance && dual <= config.dual_tolerance {
            converged = true;
            break;
        }
    }

    let feasibility = sys.feasibility_residual(&z);
    Ok(SolverReport {
        objective: nuclear_norm(&z),
        converged: converged && feasibility <= FEASIBILITY_TOLERANCE,
        solution: z,
        iterations,
        primal_residual: primal,
        dual_residual: dual,
        feasibility_residual: feasibility,
        dropped_constraints: projector.dropped().len(),
    })
}

/// Minimum-Frobenius-norm feasible point, i.e. the projection of zero.
pub fn solve_least_squares(sys: &AffineSystem) -> Result<SolverReport> {
    let projector = sys.projector()?;
    let (n1, n2) = sys.shape();
    let z = projector.apply(&Matrix::zeros(n1, n2));
    let feasibility = sys.feasibility_residual(&z);
    Ok(SolverReport {
        objective: frobenius(&z),
        converged: feasibility <= FEASIBILITY_TOLERANCE,
        solution: z,
        iterations: 1,
        primal_residual: 0.0,
        dual_residual: 0.0,
        feasibility_residual: feasibility,
        dropped_constraints: projector.dropped().len(),
    })
}

/// `‖estimate − truth‖_F / ‖truth‖_F`.
pub fn relative_error(estimate: &Matrix, truth: &Matrix) -> Result<f64> {
    crate::linalg::check_same_shape(estimate, truth)?;
    let denom = frobenius(truth);
    if denom == 0.0 {
        return Err(Error::input("truth has zero Frobenius norm"));
    }
    Ok(frobenius(&(estimate - truth)) / denom)
}

/// Relative error at most `tolerance` (inclusive).
pub fn exact_recovery(estimate: &Matrix, truth: &Matrix, tolerance: f64) -> Result<bool> {
    Ok(relative_error(estimate, truth)? <= tolerance)
}
