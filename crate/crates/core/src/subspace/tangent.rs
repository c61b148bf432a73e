use crate::error::{Error, Result};
use crate::linalg::{orthogonal_complement, Matrix};
use crate::subspace::svd::SvdFactors;

/// The tangent space `T` of rank-`r` matrices at `M`: every matrix whose column
/// space lies in `span(U)` or whose row space lies in `span(V)`.
#[derive(Debug, Clone)]
pub struct SubspaceT {
    left: Matrix,
    right: Matrix,
    pu: Matrix,
    pv: Matrix,
    dim: usize,
}

impl SubspaceT {
    pub fn from_factors(factors: &SvdFactors) -> Self {
        let left = factors.left.clone();
        let right = factors.right.clone();
        let pu = &left * left.transpose();
        let pv = &right * right.transpose();
        let (n1, n2) = factors.shape();
        let r = factors.rank();
        SubspaceT {
            left,
            right,
            pu,
            pv,
            dim: r * (n1 + n2 - r),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.pu.nrows(), self.pv.nrows())
    }

    pub fn rank(&self) -> usize {
        self.left.ncols()
    }

    /// `r(n1 + n2 − r)`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn left(&self) -> &Matrix {
        &self.left
    }

    pub fn right(&self) -> &Matrix {
        &self.right
    }

    pub fn column_projector(&self) -> &Matrix {
        &self.pu
    }

    pub fn row_projector(&self) -> &Matrix {
        &self.pv
    }

    /// `E = Σ u_k v_kᵀ`.
    pub fn sign_matrix(&self) -> Matrix {
        &self.left * self.right.transpose()
    }

    fn check(&self, x: &Matrix) -> Result<()> {
        if x.shape() != self.shape() {
            return Err(Error::dims(format!(
                "matrix is {:?}, tangent space expects {:?}",
                x.shape(),
                self.shape()
            )));
        }
        Ok(())
    }

    /// `P_U X + X P_V − P_U X P_V`.
    pub fn project(&self, x: &Matrix) -> Result<Matrix> {
        self.check(x)?;
        let pux = &self.pu * x;
        let xpv = x * &self.pv;
        let puxpv = &pux * &self.pv;
        Ok(pux + xpv - puxpv)
    }

    /// `(I − P_U) X (I − P_V)`.
    pub fn project_perp(&self, x: &Matrix) -> Result<Matrix> {
        self.check(x)?;
        let (n1, n2) = self.shape();
        let qu = Matrix::identity(n1, n1) - &self.pu;
        let qv = Matrix::identity(n2, n2) - &self.pv;
        Ok(qu * x * qv)
    }

    /// Orthonormal coordinates for `T` as the columns of an `n1·n2 × dim`
    /// matrix (row-major vectorization). The family is `{u_k e_jᵀ}` followed by
    /// `{w_a v_kᵀ}` where the `w_a` are an orthonormal basis of `span(U)^⊥`.
    pub fn coordinate_basis(&self) -> Matrix {
        let (n1, n2) = self.shape();
        let r = self.rank();
        let w = orthogonal_complement(&self.left);
        let mut basis = Matrix::zeros(n1 * n2, self.dim);
        let mut col = 0;
        for k in 0..r {
            for j in 0..n2 {
                for i in 0..n1 {
                    basis[(i * n2 + j, col)] = self.left[(i, k)];
                }
                col += 1;
            }
        }
        for a in 0..w.ncols() {
            for k in 0..r {
                for i in 0..n1 {
                    for j in 0..n2 {
                        basis[(i * n2 + j, col)] = w[(i, a)] * self.right[(j, k)];
                    }
                }
                col += 1;
            }
        }
        debug_assert_eq!(col, self.dim);
        basis
    }
}

/// Free-function form of [`SubspaceT::project`].
pub fn project_t(x: &Matrix, t: &SubspaceT) -> Result<Matrix> {
    t.project(x)
}

/// Free-function form of [`SubspaceT::project_perp`].
pub fn project_t_perp(x: &Matrix, t: &SubspaceT) -> Result<Matrix> {
    t.project_perp(x)
}
