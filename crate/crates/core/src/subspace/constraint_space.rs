use crate::error::{Error, Result};
use crate::linalg::{to_row_major, Matrix, Vector};
use crate::solver::LinearConstraint;

/// A constraint matrix is dropped when what is left of it after removing its
/// component in the running span is below this fraction of its own norm.
pub const DROP_TOLERANCE: f64 = 1e-10;

/// Orthonormalized span `Q` of the constraint matrices `A^(l)`.
#[derive(Debug, Clone)]
pub struct ConstraintSpaceQ {
    n1: usize,
    n2: usize,
    /// `effective_dim × n1·n2`; each row is a row-major vectorized basis matrix.
    basis: Matrix,
    dropped: Vec<usize>,
}

impl ConstraintSpaceQ {
    /// The zero-dimensional space (`P_Q = 0`).
    pub fn empty(n1: usize, n2: usize) -> Self {
        ConstraintSpaceQ {
            n1,
            n2,
            basis: Matrix::zeros(0, n1 * n2),
            dropped: Vec::new(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    pub fn effective_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Indices of input constraints discarded as numerically dependent.
    pub fn dropped(&self) -> &[usize] {
        &self.dropped
    }

    /// Rows are the vectorized orthonormal basis matrices.
    pub fn basis_rows(&self) -> &Matrix {
        &self.basis
    }

    pub fn basis_matrix(&self, k: usize) -> Matrix {
        Matrix::from_row_slice(self.n1, self.n2, self.basis.row(k).transpose().as_slice())
    }

    fn check(&self, x: &Matrix) -> Result<()> {
        if x.shape() != (self.n1, self.n2) {
            return Err(Error::dims(format!(
                "matrix is {:?}, constraint space expects {:?}",
                x.shape(),
                (self.n1, self.n2)
            )));
        }
        Ok(())
    }

    /// Coefficients `⟨Q_k, X⟩` of `X` in the orthonormal basis.
    pub fn coefficients(&self, x: &Matrix) -> Result<Vector> {
        self.check(x)?;
        Ok(&self.basis * to_row_major(x))
    }

    pub fn project(&self, x: &Matrix) -> Result<Matrix> {
        let c = self.coefficients(x)?;
        let v = self.basis.tr_mul(&c);
        Ok(Matrix::from_row_slice(self.n1, self.n2, v.as_slice()))
    }

    pub fn project_perp(&self, x: &Matrix) -> Result<Matrix> {
        Ok(x - self.project(x)?)
    }
}

/// Gram-Schmidt (two passes) over the vectorized constraint matrices.
///
/// An empty list yields the zero-dimensional space.
pub fn orthonormalize_constraints(
    n1: usize,
    n2: usize,
    matrices: &[Matrix],
) -> Result<ConstraintSpaceQ> {
    let dim = n1 * n2;
    let mut rows: Vec<Vector> = Vec::new();
    let mut dropped = Vec::new();
    for (l, a) in matrices.iter().enumerate() {
        if a.shape() != (n1, n2) {
            return Err(Error::dims(format!(
                "constraint {l} is {:?}, expected {:?}",
                a.shape(),
                (n1, n2)
            )));
        }
        let mut v = to_row_major(a);
        let own = v.norm();
        if !own.is_finite() {
            return Err(Error::input(format!("constraint {l} has non-finite entries")));
        }
        for _ in 0..2 {
            for q in &rows {
                let d = q.dot(&v);
                v.axpy(-d, q, 1.0);
            }
        }
        let rest = v.norm();
        if own == 0.0 || rest <= DROP_TOLERANCE * own {
            dropped.push(l);
            continue;
        }
        rows.push(v / rest);
    }
    let mut basis = Matrix::zeros(rows.len(), dim);
    for (k, q) in rows.iter().enumerate() {
        basis.set_row(k, &q.transpose());
    }
    Ok(ConstraintSpaceQ {
        n1,
        n2,
        basis,
        dropped,
    })
}

impl ConstraintSpaceQ {
    /// Span of the coefficient matrices of sparse linear constraints.
    pub fn from_constraints(n1: usize, n2: usize, constraints: &[LinearConstraint]) -> Result<Self> {
        let dense: Vec<Matrix> = constraints
            .iter()
            .map(|c| c.to_dense(n1, n2))
            .collect::<Result<_>>()?;
        orthonormalize_constraints(n1, n2, &dense)
    }
}
