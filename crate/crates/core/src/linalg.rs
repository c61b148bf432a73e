//! Small dense helpers shared by every module.
//!
//! Matrices are `nalgebra::DMatrix<f64>`. Whenever a matrix is flattened into a
//! vector the layout is row-major: entry `(i, j)` of an `n1 x n2` matrix lives
//! at index `i * n2 + j`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

pub fn frobenius(m: &Matrix) -> f64 {
    m.norm()
}

pub fn inner(a: &Matrix, b: &Matrix) -> f64 {
    a.dot(b)
}

/// Singular values in non-increasing order.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

pub fn nuclear_norm(m: &Matrix) -> f64 {
    singular_values(m).iter().sum()
}

pub fn spectral_norm(m: &Matrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn flat_index(i: usize, j: usize, n2: usize) -> usize {
    i * n2 + j
}

pub fn to_row_major(m: &Matrix) -> Vector {
    let (n1, n2) = m.shape();
    Vector::from_fn(n1 * n2, |k, _| m[(k / n2, k % n2)])
}

pub fn from_row_major(n1: usize, n2: usize, data: &[f64]) -> Result<Matrix> {
    if data.len() != n1 * n2 {
        return Err(Error::dims(format!(
            "expected {} values for a {n1}x{n2} matrix, got {}",
            n1 * n2,
            data.len()
        )));
    }
    Ok(Matrix::from_row_slice(n1, n2, data))
}

pub fn check_finite(m: &Matrix) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::input("matrix contains non-finite entries"))
    }
}

pub fn check_same_shape(a: &Matrix, b: &Matrix) -> Result<()> {
    if a.shape() == b.shape() {
        Ok(())
    } else {
        Err(Error::dims(format!(
            "{:?} vs {:?}",
            a.shape(),
            b.shape()
        )))
    }
}

/// Orthonormal basis (as columns) of the orthogonal complement of the column
/// span of `basis`, which must have orthonormal columns.
pub fn orthogonal_complement(basis: &Matrix) -> Matrix {
    let n = basis.nrows();
    let r = basis.ncols();
    let mut cols: Vec<Vector> = (0..r).map(|k| basis.column(k).into_owned()).collect();
    let mut out = Vec::with_capacity(n - r);
    for i in 0..n {
        if out.len() == n - r {
            break;
        }
        let mut v = Vector::zeros(n);
        v[i] = 1.0;
        // two passes of Gram-Schmidt keep the result orthonormal to ~1e-15
        for _ in 0..2 {
            for c in &cols {
                let d = c.dot(&v);
                v.axpy(-d, c, 1.0);
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            v /= norm;
            cols.push(v.clone());
            out.push(v);
        }
    }
    if out.is_empty() {
        return Matrix::zeros(n, 0);
    }
    Matrix::from_columns(&out)
}

/// Largest absolute deviation of `QᵀQ` from the identity.
pub fn gram_deviation(q: &Matrix) -> f64 {
    let g = q.transpose() * q;
    let mut dev: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((g[(i, j)] - target).abs());
        }
    }
    dev
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_major_round_trip() {
        let m = Matrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let v = to_row_major(&m);
        assert_eq!(v.as_slice(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(from_row_major(2, 3, v.as_slice()).unwrap(), m);
        assert!(from_row_major(2, 2, v.as_slice()).is_err());
    }

    #[test]
    fn complement_is_orthonormal_and_orthogonal() {
        let u = Matrix::from_column_slice(3, 1, &[1.0 / 3f64.sqrt(); 3]);
        let w = orthogonal_complement(&u);
        assert_eq!(w.shape(), (3, 2));
        assert!(gram_deviation(&w) < 1e-14);
        assert!((u.transpose() * &w).norm() < 1e-14);
    }

    #[test]
    fn empty_complement_for_full_basis() {
        let w = orthogonal_complement(&Matrix::identity(2, 2));
        assert_eq!(w.shape(), (2, 0));
    }

    #[test]
    fn norms_of_diagonal() {
        let m = Matrix::from_diagonal(&Vector::from_vec(vec![3.0, -1.0]));
        assert!((nuclear_norm(&m) - 4.0).abs() < 1e-14);
        assert!((spectral_norm(&m) - 3.0).abs() < 1e-14);
    }
}
