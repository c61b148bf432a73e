use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{check_finite, gram_deviation, singular_values, Matrix};
use crate::subspace::constraint_space::ConstraintSpaceQ;
use crate::subspace::svd::{truncated_svd, RankSelection, SvdFactors};
use crate::subspace::tangent::SubspaceT;

const BASIS_TOLERANCE: f64 = 1e-8;
const RANGE_WINDOW: f64 = 1e-9;

/// Coherence `μ(U) = (n/r) max_i ‖P_U e_i‖²` of the span of `basis`'s
/// orthonormal columns.
pub fn mu_coherence(basis: &Matrix) -> Result<f64> {
    let (n, r) = basis.shape();
    if r == 0 || r > n {
        return Err(Error::input(format!("basis of {r} vectors in R^{n}")));
    }
    let dev = gram_deviation(basis);
    if dev > BASIS_TOLERANCE {
        return Err(Error::InvalidBasis(dev));
    }
    // ‖P_U e_i‖² is the squared norm of row i of the basis
    let max_row = basis
        .row_iter()
        .map(|row| row.norm_squared())
        .fold(0.0, f64::max);
    Ok(n as f64 / r as f64 * max_row)
}

/// Smallest `ν₀` with `|E_ij| ≤ ν₀ √(r / (n1 n2))` for every entry.
pub fn nu0(factors: &SvdFactors) -> f64 {
    let (n1, n2) = factors.shape();
    let r = factors.rank() as f64;
    let e = factors.sign_matrix();
    let max_abs = e.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    max_abs / (r / (n1 * n2) as f64).sqrt()
}

fn check_compatible(t: &SubspaceT, q: &ConstraintSpaceQ) -> Result<()> {
    if t.shape() != q.shape() {
        return Err(Error::dims(format!(
            "tangent space {:?} vs constraint space {:?}",
            t.shape(),
            q.shape()
        )));
    }
    Ok(())
}

/// Fraction of `T` left uncovered by `Q`, as the ratio
/// `Σ_ij ‖P_T P_Q⊥(e_i e_jᵀ)‖² / Σ_ij ‖P_T(e_i e_jᵀ)‖²`, evaluated by looping
/// over every standard basis matrix.
pub fn mu_q_perp(t: &SubspaceT, q: &ConstraintSpaceQ) -> Result<f64> {
    check_compatible(t, q)?;
    if t.dim() == 0 {
        return Err(Error::UndefinedMetric("tangent space has dimension 0".into()));
    }
    let (n1, n2) = t.shape();
    let basis = q.basis_rows();
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    let mut e = Matrix::zeros(n1, n2);
    for i in 0..n1 {
        for j in 0..n2 {
            e[(i, j)] = 1.0;
            denominator += t.project(&e)?.norm_squared();

            // P_Q⊥(e_ij) = e_ij − Σ_k Q_k[ij] Q_k
            let along = basis.tr_mul(&basis.column(i * n2 + j));
            let mut resid = -Matrix::from_row_slice(n1, n2, along.as_slice());
            resid[(i, j)] += 1.0;
            numerator += t.project(&resid)?.norm_squared();
            e[(i, j)] = 0.0;
        }
    }
    let dim = t.dim() as f64;
    assert!(
        ((denominator - dim) / dim).abs() < 1e-8,
        "trace of P_T is {denominator}, expected {dim}"
    );
    clamp_unit(numerator / denominator, "mu_Q_perp")
}

/// Closed form of [`mu_q_perp`]: `(dim T − Σ_k ‖P_T Q_k‖²) / dim T`.
///
/// Uses `Σ_ij ‖P_T P_Q⊥ e_ij‖² = tr(P_T P_Q⊥) = dim T − tr(P_T P_Q)`; agrees
/// with the loop to rounding and costs `O(dim Q)` projections instead of
/// `O(n1 n2)`.
pub fn mu_q_perp_trace(t: &SubspaceT, q: &ConstraintSpaceQ) -> Result<f64> {
    check_compatible(t, q)?;
    if t.dim() == 0 {
        return Err(Error::UndefinedMetric("tangent space has dimension 0".into()));
    }
    let mut covered = 0.0;
    for k in 0..q.effective_dim() {
        covered += t.project(&q.basis_matrix(k))?.norm_squared();
    }
    let dim = t.dim() as f64;
    clamp_unit((dim - covered) / dim, "mu_Q_perp")
}

/// `(1/r) ‖P_Q⊥(E)‖²_F`: how much of `E = Σ u_k v_kᵀ` lies outside `Q`.
pub fn nu_q_perp(factors: &SvdFactors, q: &ConstraintSpaceQ) -> Result<f64> {
    if factors.shape() != q.shape() {
        return Err(Error::dims(format!(
            "factors {:?} vs constraint space {:?}",
            factors.shape(),
            q.shape()
        )));
    }
    let e = factors.sign_matrix();
    let value = q.project_perp(&e)?.norm_squared() / factors.rank() as f64;
    clamp_unit(value, "nu_Q_perp")
}

fn clamp_unit(value: f64, name: &str) -> Result<f64> {
    assert!(
        (-RANGE_WINDOW..=1.0 + RANGE_WINDOW).contains(&value),
        "{name} = {value} outside [0, 1]"
    );
    Ok(value.clamp(0.0, 1.0))
}

/// Singular values normalized by their sum and their running totals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scree {
    pub normalized: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl Scree {
    /// Cumulative share of the first `k` singular values (`k ≥ 1`).
    pub fn top(&self, k: usize) -> f64 {
        if self.cumulative.is_empty() || k == 0 {
            return 0.0;
        }
        self.cumulative[(k - 1).min(self.cumulative.len() - 1)]
    }
}

pub fn scree(m: &Matrix) -> Result<Scree> {
    check_finite(m)?;
    let sv = singular_values(m);
    let total: f64 = sv.iter().sum();
    if !(total > 0.0) {
        return Err(Error::UndefinedMetric("scree of a zero matrix".into()));
    }
    let normalized: Vec<f64> = sv.iter().map(|s| s / total).collect();
    let mut cumulative = Vec::with_capacity(normalized.len());
    let mut acc = 0.0;
    for v in &normalized {
        acc += v;
        cumulative.push(acc);
    }
    if let Some(last) = cumulative.last_mut() {
        *last = 1.0;
    }
    Ok(Scree {
        normalized,
        cumulative,
    })
}

/// Everything the sample-complexity analysis needs to know about `M` and `Q`.
#[derive(Debug, Clone, Serialize)]
pub struct CoherenceReport {
    pub n1: usize,
    pub n2: usize,
    pub r: usize,
    pub singular_values: Vec<f64>,
    pub mu_u: f64,
    pub mu_v: f64,
    pub mu0: f64,
    pub nu0: f64,
    pub mu_q_perp: f64,
    pub nu_q_perp: f64,
    pub dim_t: usize,
    pub constraint_dim: usize,
    pub dropped_constraints: usize,
    pub scree: Scree,
}

/// Computes the full report. Without constraints `Q = {0}`, so both coverage
/// metrics equal 1.
pub fn coherence_report(
    m: &Matrix,
    rank: RankSelection,
    constraints: Option<&ConstraintSpaceQ>,
) -> Result<CoherenceReport> {
    let scree = scree(m)?;
    let factors = truncated_svd(m, rank)?;
    let (n1, n2) = m.shape();
    let t = SubspaceT::from_factors(&factors);
    let empty;
    let q = match constraints {
        Some(q) => q,
        None => {
            empty = ConstraintSpaceQ::empty(n1, n2);
            &empty
        }
    };
    let mu_u = mu_coherence(&factors.left)?;
    let mu_v = mu_coherence(&factors.right)?;
    Ok(CoherenceReport {
        n1,
        n2,
        r: factors.rank(),
        singular_values: factors.singular_values.clone(),
        mu_u,
        mu_v,
        mu0: mu_u.max(mu_v),
        nu0: nu0(&factors),
        mu_q_perp: mu_q_perp(&t, q)?,
        nu_q_perp: nu_q_perp(&factors, q)?,
        dim_t: t.dim(),
        constraint_dim: q.effective_dim(),
        dropped_constraints: q.dropped().len(),
        scree,
    })
}
