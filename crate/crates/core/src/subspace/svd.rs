use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{check_finite, Matrix};

/// Relative cutoff applied when no explicit rank is requested.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-8;

/// How many singular triplets [`truncated_svd`] keeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RankSelection {
    /// Keep exactly this many triplets.
    Fixed(usize),
    /// Keep every `σ_k ≥ tol · σ_1`.
    Tolerance(f64),
}

impl Default for RankSelection {
    fn default() -> Self {
        RankSelection::Tolerance(DEFAULT_RANK_TOLERANCE)
    }
}

/// Rank-`r` singular triplets of a matrix.
///
/// Columns of `left` and `right` are orthonormal, singular values are strictly
/// positive and non-increasing. Signs are fixed so that the largest-magnitude
/// entry of every left vector is positive (ties go to the lowest row index),
/// which makes the factors reproducible bit for bit.
#[derive(Debug, Clone, Serialize)]
pub struct SvdFactors {
    #[serde(skip)]
    pub left: Matrix,
    #[serde(skip)]
    pub right: Matrix,
    pub singular_values: Vec<f64>,
    /// Relative cutoff that produced the truncation.
    pub rank_tolerance: f64,
    /// Frobenius norm of the discarded tail `(Σ_{k>r} σ_k²)^½`.
    pub discarded_norm: f64,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.left.nrows(), self.right.nrows())
    }

    pub fn reconstruct(&self) -> Matrix {
        let sigma = Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(
            &self.singular_values,
        ));
        &self.left * sigma * self.right.transpose()
    }

    /// `E = Σ u_k v_kᵀ`, the sign pattern of the nuclear-norm subgradient at `M`.
    pub fn sign_matrix(&self) -> Matrix {
        &self.left * self.right.transpose()
    }
}

/// Truncated SVD with deterministic signs.
pub fn truncated_svd(m: &Matrix, selection: RankSelection) -> Result<SvdFactors> {
    check_finite(m)?;
    let (n1, n2) = m.shape();
    let full_rank = n1.min(n2);
    if let RankSelection::Fixed(r) = selection {
        if r == 0 || r > full_rank {
            return Err(Error::InvalidRank {
                rank: r,
                rows: n1,
                cols: n2,
            });
        }
    }
    if full_rank == 0 {
        return Err(Error::input("empty matrix"));
    }

    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("left vectors requested");
    let vt = svd.v_t.expect("right vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .total_cmp(&svd.singular_values[a])
            .then(a.cmp(&b))
    });
    let sigma: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
    let sigma1 = sigma[0];

    let (rank, tol) = match selection {
        RankSelection::Fixed(r) => {
            if !(sigma[r - 1] > DEFAULT_RANK_TOLERANCE * sigma1) || sigma1 == 0.0 {
                return Err(Error::InvalidRank {
                    rank: r,
                    rows: n1,
                    cols: n2,
                });
            }
            let tol = if r < sigma.len() {
                sigma[r] / sigma1
            } else {
                0.0
            };
            (r, tol)
        }
        RankSelection::Tolerance(tol) => {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(Error::input(format!("rank tolerance must be positive, got {tol}")));
            }
            if sigma1 == 0.0 {
                return Err(Error::InvalidRank {
                    rank: 0,
                    rows: n1,
                    cols: n2,
                });
            }
            let r = sigma.iter().take_while(|&&s| s >= tol * sigma1).count();
            (r, tol)
        }
    };

    let mut left = Matrix::zeros(n1, rank);
    let mut right = Matrix::zeros(n2, rank);
    for (k, &src) in order.iter().take(rank).enumerate() {
        let mut uk = u.column(src).into_owned();
        let mut vk = vt.row(src).transpose();
        let mut pivot = 0;
        for i in 1..n1 {
            if uk[i].abs() > uk[pivot].abs() {
                pivot = i;
            }
        }
        if uk[pivot] < 0.0 {
            uk.neg_mut();
            vk.neg_mut();
        }
        left.set_column(k, &uk);
        right.set_column(k, &vk);
    }
    let discarded_norm = sigma[rank..].iter().map(|s| s * s).sum::<f64>().sqrt();

    Ok(SvdFactors {
        left,
        right,
        singular_values: sigma[..rank].to_vec(),
        rank_tolerance: tol,
        discarded_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius, gram_deviation};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n1: usize, n2: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(n1, n2, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn diagonal_matrix() {
        let m = Matrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        let f = truncated_svd(&m, RankSelection::Fixed(2)).unwrap();
        assert!((f.singular_values[0] - 3.0).abs() < 1e-14);
        assert!((f.singular_values[1] - 1.0).abs() < 1e-14);
        assert!((f.left.clone() - Matrix::identity(2, 2)).norm() < 1e-14);
        assert!((f.right.clone() - Matrix::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn exact_rank_one() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        let f = truncated_svd(&m, RankSelection::Fixed(1)).unwrap();
        assert!((f.singular_values[0] - 10f64.sqrt()).abs() < 1e-14);
        assert!(frobenius(&(f.reconstruct() - &m)) < 1e-14);
        // tolerance mode finds the same rank
        let g = truncated_svd(&m, RankSelection::default()).unwrap();
        assert_eq!(g.rank(), 1);
    }

    #[test]
    fn random_full_rank_matches_eigen_oracle() {
        let m = random_matrix(6, 4, 11);
        let f = truncated_svd(&m, RankSelection::Fixed(4)).unwrap();
        assert!(frobenius(&(f.reconstruct() - &m)) < 1e-10);
        assert!(gram_deviation(&f.left) < 1e-10);
        assert!(gram_deviation(&f.right) < 1e-10);

        // independent route: eigenvalues of MᵀM are σ²
        let eig = (m.transpose() * &m).symmetric_eigen();
        let mut ev: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0).sqrt()).collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        for (s, e) in f.singular_values.iter().zip(&ev) {
            assert!((s - e).abs() < 1e-10, "{s} vs {e}");
        }
        // and M v_k = σ_k u_k
        for k in 0..4 {
            let lhs = &m * f.right.column(k);
            let rhs = f.left.column(k) * f.singular_values[k];
            assert!((lhs - rhs).norm() < 1e-10);
        }
    }

    #[test]
    fn sign_convention_is_stable() {
        let m = random_matrix(5, 3, 2);
        let a = truncated_svd(&m, RankSelection::Fixed(2)).unwrap();
        let b = truncated_svd(&(-&m * -1.0), RankSelection::Fixed(2)).unwrap();
        assert_eq!(a.left, b.left);
        for k in 0..2 {
            let col = a.left.column(k);
            let imax = col.iamax();
            assert!(col[imax] > 0.0);
        }
    }

    #[test]
    fn rank_errors() {
        let m = random_matrix(3, 2, 1);
        assert!(matches!(
            truncated_svd(&m, RankSelection::Fixed(3)),
            Err(Error::InvalidRank { .. })
        ));
        assert!(matches!(
            truncated_svd(&m, RankSelection::Fixed(0)),
            Err(Error::InvalidRank { .. })
        ));
        let mut bad = m.clone();
        bad[(0, 0)] = f64::NAN;
        assert!(matches!(
            truncated_svd(&bad, RankSelection::Fixed(1)),
            Err(Error::InvalidInput(_))
        ));
        assert!(truncated_svd(&Matrix::zeros(3, 2), RankSelection::default()).is_err());
    }

    #[test]
    fn truncation_reports_tail() {
        let m = Matrix::from_row_slice(3, 3, &[4.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0]);
        let f = truncated_svd(&m, RankSelection::Fixed(1)).unwrap();
        assert!((f.discarded_norm - 5f64.sqrt()).abs() < 1e-14);
        assert!((frobenius(&(f.reconstruct() - &m)) - f.discarded_norm).abs() < 1e-12);
    }
}
