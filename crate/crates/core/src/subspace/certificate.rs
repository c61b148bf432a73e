use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, to_row_major, Matrix};
use crate::subspace::constraint_space::ConstraintSpaceQ;
use crate::subspace::tangent::SubspaceT;

/// Condition number above which the restricted operator is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;
/// `‖P_T(Y) − E‖_F` allowed for a passing certificate.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    #[serde(skip)]
    pub y: Matrix,
    /// Spectral norm of `P_T⊥(Y)`; must be below 1.
    pub spectral_norm_t_perp: f64,
    /// `‖P_T(Y) − E‖_F`.
    pub pt_residual: f64,
    /// Condition number of `P_T (P_Ω + q P_Q) P_T` restricted to `T`.
    pub condition_number: f64,
}

impl CertificateReport {
    pub fn passes(&self) -> bool {
        self.pt_residual <= RESIDUAL_TOLERANCE && self.spectral_norm_t_perp < 1.0
    }
}

/// Builds `Y = (P_Ω + q P_Q) P_T (P_T (P_Ω + q P_Q) P_T)⁻¹ (E)` and measures how
/// close it comes to certifying that `M` is the unique nuclear-norm minimizer.
///
/// The inverse is taken on `T` only, by solving a `dim T × dim T` system in the
/// orthonormal coordinates of [`SubspaceT::coordinate_basis`].
pub fn dual_certificate(
    t: &SubspaceT,
    omega: &[(usize, usize)],
    q_space: &ConstraintSpaceQ,
    q: f64,
) -> Result<CertificateReport> {
    let (n1, n2) = t.shape();
    if q_space.shape() != (n1, n2) {
        return Err(Error::dims(format!(
            "constraint space {:?} vs tangent space {:?}",
            q_space.shape(),
            (n1, n2)
        )));
    }
    if !(q >= 0.0) || !q.is_finite() {
        return Err(Error::input(format!("q must be non-negative, got {q}")));
    }
    let mut observed = vec![false; n1 * n2];
    for &(i, j) in omega {
        if i >= n1 || j >= n2 {
            return Err(Error::dims(format!("observation ({i}, {j}) outside {n1}x{n2}")));
        }
        observed[i * n2 + j] = true;
    }

    let basis = t.coordinate_basis();
    let d = basis.ncols();

    // Bᵀ P_Ω B: only the observed rows of B contribute
    let mut gram = Matrix::zeros(d, d);
    for (idx, _) in observed.iter().enumerate().filter(|(_, &o)| o) {
        let row = basis.row(idx);
        gram.ger(1.0, &row.transpose(), &row.transpose(), 1.0);
    }
    if q > 0.0 && q_space.effective_dim() > 0 {
        let qb = q_space.basis_rows() * &basis;
        gram += qb.tr_mul(&qb) * q;
    }

    let eig = gram.clone().symmetric_eigen();
    let max_eig = eig.eigenvalues.max();
    let min_eig = eig.eigenvalues.min();
    let condition = if min_eig > 0.0 { max_eig / min_eig } else { f64::INFINITY };
    if !(max_eig > 0.0) || condition > MAX_CONDITION {
        return Err(Error::NotInvertible(condition));
    }

    let e = t.sign_matrix();
    let rhs = basis.tr_mul(&to_row_major(&e));
    let coords = gram
        .cholesky()
        .ok_or(Error::NotInvertible(condition))?
        .solve(&rhs);
    let nu = Matrix::from_row_slice(n1, n2, (&basis * coords).as_slice());

    let mut y = q_space.project(&nu)? * q;
    for (idx, &o) in observed.iter().enumerate() {
        if o {
            y[(idx / n2, idx % n2)] += nu[(idx / n2, idx % n2)];
        }
    }

    let pt_residual = (t.project(&y)? - &e).norm();
    let spectral_norm_t_perp = spectral_norm(&t.project_perp(&y)?);
    Ok(CertificateReport {
        y,
        spectral_norm_t_perp,
        pt_residual,
        condition_number: condition,
    })
}
