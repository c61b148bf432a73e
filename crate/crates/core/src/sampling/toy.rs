use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{inner, Matrix};
use crate::solver::LinearConstraint;
use crate::subspace::{degrees_of_freedom, truncated_svd, RankSelection, SubspaceT};

/// Rank-`r` truncation of a `U(0, 1)` matrix.
pub fn generate_toy_instance(n1: usize, n2: usize, r: usize, seed: u64) -> Result<Matrix> {
    if r == 0 || r > n2 || n2 > n1 {
        return Err(Error::input(format!(
            "toy instance needs 1 ≤ r ≤ n2 ≤ n1, got r={r}, {n1}x{n2}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = Matrix::from_fn(n1, n2, |_, _| rng.random::<f64>());
    Ok(truncated_svd(&raw, RankSelection::Fixed(r))?.reconstruct())
}

/// Constraints `⟨Ã, X⟩ = ⟨Ã, M⟩` with `Ã = mix P_T(A) + (1 − mix) P_T⊥(A)`
/// for uniform random `A`. `count` defaults to `dim T`.
///
/// The draws depend only on `seed`, so sweeping `mix` reuses the same `A`.
pub fn generate_tuned_constraints(
    truth: &Matrix,
    r: usize,
    count: Option<usize>,
    mix: f64,
    seed: u64,
) -> Result<Vec<LinearConstraint>> {
    if !(0.0..=1.0).contains(&mix) {
        return Err(Error::input(format!("mix must lie in [0, 1], got {mix}")));
    }
    let (n1, n2) = truth.shape();
    let count = match count {
        Some(c) => c,
        None => degrees_of_freedom(n1, n2, r)?,
    };
    if count == 0 {
        return Err(Error::input("constraint count must be at least 1"));
    }
    let t = SubspaceT::from_factors(&truncated_svd(truth, RankSelection::Fixed(r))?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let a = Matrix::from_fn(n1, n2, |_, _| rng.random::<f64>());
            let in_t = t.project(&a)?;
            let tilted = &in_t * mix + (&a - &in_t) * (1.0 - mix);
            let b = inner(&tilted, truth);
            Ok(LinearConstraint::from_dense(&tilted, b))
        })
        .collect()
}
