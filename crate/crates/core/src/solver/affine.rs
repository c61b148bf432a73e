use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

/// Two observations of the same entry are merged when they agree to this.
pub const OBSERVATION_CONFLICT_TOLERANCE: f64 = 1e-12;
/// A normalized row is dependent when its residual against the running span
/// falls below this.
pub const ROW_DROP_TOLERANCE: f64 = 1e-10;
/// A dependent row must reproduce its right-hand side to this (after the row
/// is normalized to unit length), otherwise the system is infeasible.
pub const ROW_CONSISTENCY_TOLERANCE: f64 = 1e-8;

pub type Entry = (usize, usize);

/// `Σ coeff · X_ij = rhs`, with coefficients keyed by matrix position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub terms: Vec<(usize, usize, f64)>,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn new(terms: Vec<(usize, usize, f64)>, rhs: f64) -> Self {
        LinearConstraint { terms, rhs }
    }

    /// Sparse form of `⟨A, X⟩ = rhs`, skipping exact zeros of `A`.
    pub fn from_dense(a: &Matrix, rhs: f64) -> Self {
        let (n1, n2) = a.shape();
        let mut terms = Vec::new();
        for i in 0..n1 {
            for j in 0..n2 {
                if a[(i, j)] != 0.0 {
                    terms.push((i, j, a[(i, j)]));
                }
            }
        }
        LinearConstraint { terms, rhs }
    }

    pub fn to_dense(&self, n1: usize, n2: usize) -> Result<Matrix> {
        let mut a = Matrix::zeros(n1, n2);
        for &(i, j, c) in &self.terms {
            if i >= n1 || j >= n2 {
                return Err(Error::dims(format!("term ({i}, {j}) outside {n1}x{n2}")));
            }
            a[(i, j)] += c;
        }
        Ok(a)
    }

    pub fn evaluate(&self, x: &Matrix) -> f64 {
        self.terms.iter().map(|&(i, j, c)| c * x[(i, j)]).sum()
    }

    pub fn residual(&self, x: &Matrix) -> f64 {
        self.evaluate(x) - self.rhs
    }

    pub fn entries(&self) -> impl Iterator<Item = Entry> + '_ {
        self.terms.iter().map(|&(i, j, _)| (i, j))
    }

    fn coefficient_norm(&self) -> f64 {
        self.terms.iter().map(|t| t.2 * t.2).sum::<f64>().sqrt()
    }
}

/// Feasible set `{X : X_ij = v_ij for pinned entries, ⟨A^(l), X⟩ = b^(l)}`.
#[derive(Debug)]
pub struct AffineSystem {
    shape: (usize, usize),
    entries: Vec<(Entry, f64)>,
    linear: Vec<LinearConstraint>,
    projector: OnceLock<AffineProjector>,
}

impl Clone for AffineSystem {
    fn clone(&self) -> Self {
        AffineSystem {
            shape: self.shape,
            entries: self.entries.clone(),
            linear: self.linear.clone(),
            projector: OnceLock::new(),
        }
    }
}

/// Merges pinned entries (observations, structural zeros) and general linear
/// constraints. Duplicate entries that agree are collapsed; overall
/// consistency is checked later, when the projector is factorized.
pub fn assemble_affine(
    shape: (usize, usize),
    observations: &[(Entry, f64)],
    constraints: Vec<LinearConstraint>,
) -> Result<AffineSystem> {
    let (n1, n2) = shape;
    let mut merged: BTreeMap<usize, (Entry, f64)> = BTreeMap::new();
    for &((i, j), v) in observations {
        if i >= n1 || j >= n2 {
            return Err(Error::dims(format!("observation ({i}, {j}) outside {n1}x{n2}")));
        }
        if !v.is_finite() {
            return Err(Error::input(format!("observation ({i}, {j}) is not finite")));
        }
        match merged.get(&(i * n2 + j)) {
            Some(&(_, prev)) if (prev - v).abs() > OBSERVATION_CONFLICT_TOLERANCE => {
                return Err(Error::InconsistentObservation {
                    i,
                    j,
                    first: prev,
                    second: v,
                })
            }
            Some(_) => {}
            None => {
                merged.insert(i * n2 + j, ((i, j), v));
            }
        }
    }
    for (l, c) in constraints.iter().enumerate() {
        for &(i, j, coef) in &c.terms {
            if i >= n1 || j >= n2 {
                return Err(Error::dims(format!(
                    "constraint {l} references ({i}, {j}) outside {n1}x{n2}"
                )));
            }
            if !coef.is_finite() {
                return Err(Error::input(format!("constraint {l} has a non-finite coefficient")));
            }
        }
        if !c.rhs.is_finite() {
            return Err(Error::input(format!("constraint {l} has a non-finite rhs")));
        }
    }
    Ok(AffineSystem {
        shape,
        entries: merged.into_values().collect(),
        linear: constraints,
        projector: OnceLock::new(),
    })
}

impl AffineSystem {
    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    /// Pinned entries, ordered row-major.
    pub fn entries(&self) -> &[(Entry, f64)] {
        &self.entries
    }

    pub fn linear(&self) -> &[LinearConstraint] {
        &self.linear
    }

    /// Largest violation `max |C x − d|` over every row.
    pub fn feasibility_residual(&self, x: &Matrix) -> f64 {
        let pinned = self
            .entries
            .iter()
            .map(|&((i, j), v)| (x[(i, j)] - v).abs());
        let general = self.linear.iter().map(|c| c.residual(x).abs());
        pinned.chain(general).fold(0.0, f64::max)
    }

    /// The cached factorization, built on first use.
    pub fn projector(&self) -> Result<&AffineProjector> {
        if let Some(p) = self.projector.get() {
            return Ok(p);
        }
        let built = AffineProjector::build(self)?;
        Ok(self.projector.get_or_init(|| built))
    }

    pub fn project(&self, x: &Matrix) -> Result<Matrix> {
        if x.shape() != self.shape {
            return Err(Error::dims(format!(
                "matrix is {:?}, system expects {:?}",
                x.shape(),
                self.shape
            )));
        }
        Ok(self.projector()?.apply(x))
    }
}

/// Euclidean projection onto the feasible set of `sys`.
pub fn project_affine(x: &Matrix, sys: &AffineSystem) -> Result<Matrix> {
    sys.project(x)
}

/// Incrementally built orthonormal basis of constraint rows over the free
/// (unpinned) coordinates, with the right-hand sides carried along.
#[derive(Debug, Clone)]
pub(crate) struct RowBasis {
    width: usize,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
}

pub(crate) enum RowOutcome {
    Added,
    /// Dependent on earlier rows; holds the rhs mismatch after normalization.
    Dependent(f64),
}

impl RowBasis {
    pub(crate) fn new(width: usize) -> Self {
        RowBasis {
            width,
            rows: Vec::new(),
            rhs: Vec::new(),
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.rows.len()
    }

    /// Orthogonalizes `row` (two Gram-Schmidt passes) and keeps it if enough
    /// of it survives. `scale` is the norm used to normalize the row before
    /// the drop test.
    pub(crate) fn push(&mut self, mut row: Vec<f64>, mut rhs: f64, scale: f64) -> RowOutcome {
        debug_assert_eq!(row.len(), self.width);
        if scale > 0.0 {
            for v in row.iter_mut() {
                *v /= scale;
            }
            rhs /= scale;
        }
        for _ in 0..2 {
            for (q, &dq) in self.rows.iter().zip(&self.rhs) {
                let d = dot(q, &row);
                if d != 0.0 {
                    axpy(-d, q, &mut row);
                    rhs -= d * dq;
                }
            }
        }
        let norm = dot(&row, &row).sqrt();
        if scale == 0.0 || norm <= ROW_DROP_TOLERANCE {
            return RowOutcome::Dependent(rhs);
        }
        for v in row.iter_mut() {
            *v /= norm;
        }
        self.rows.push(row);
        self.rhs.push(rhs / norm);
        RowOutcome::Added
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Splits a sparse constraint into its free-coordinate row and its rhs after
/// moving pinned terms across.
fn reduce_row(
    c: &LinearConstraint,
    n2: usize,
    free_pos: &[Option<usize>],
    pinned_values: &[f64],
    width: usize,
) -> (Vec<f64>, f64) {
    let mut row = vec![0.0; width];
    let mut rhs = c.rhs;
    for &(i, j, coef) in &c.terms {
        let flat = i * n2 + j;
        match free_pos[flat] {
            Some(p) => row[p] += coef,
            None => rhs -= coef * pinned_values[flat],
        }
    }
    (row, rhs)
}

/// Factorized projector: pinned entries are assigned directly and the general
/// rows act through an orthonormal row basis `Q` over the free coordinates,
/// so that `x_free ← x_free − Qᵀ(Q x_free − d)`.
#[derive(Debug, Clone)]
pub struct AffineProjector {
    shape: (usize, usize),
    free: Vec<usize>,
    base: Matrix,
    rows: Matrix,
    rhs: Vector,
    dropped: Vec<usize>,
}

impl AffineProjector {
    fn build(sys: &AffineSystem) -> Result<Self> {
        let (n1, n2) = sys.shape;
        let mut pinned_values = vec![0.0; n1 * n2];
        let mut is_pinned = vec![false; n1 * n2];
        let mut base = Matrix::zeros(n1, n2);
        for &((i, j), v) in &sys.entries {
            pinned_values[i * n2 + j] = v;
            is_pinned[i * n2 + j] = true;
            base[(i, j)] = v;
        }
        let mut free = Vec::new();
        let mut free_pos = vec![None; n1 * n2];
        for flat in 0..n1 * n2 {
            if !is_pinned[flat] {
                free_pos[flat] = Some(free.len());
                free.push(flat);
            }
        }

        let mut basis = RowBasis::new(free.len());
        let mut dropped = Vec::new();
        for (l, c) in sys.linear.iter().enumerate() {
            let (row, rhs) = reduce_row(c, n2, &free_pos, &pinned_values, free.len());
            let row_norm = dot(&row, &row).sqrt();
            // a row with nothing left on free coordinates is judged against
            // the size of its original coefficients
            let (scale, check_scale) = if row_norm > 0.0 {
                (row_norm, 1.0)
            } else {
                (0.0, c.coefficient_norm().max(1.0))
            };
            if let RowOutcome::Dependent(mismatch) = basis.push(row, rhs, scale) {
                if mismatch.abs() > ROW_CONSISTENCY_TOLERANCE * check_scale {
                    return Err(Error::Infeasible(format!(
                        "constraint {l} contradicts the others (mismatch {mismatch:e})"
                    )));
                }
                dropped.push(l);
            }
        }

        let k = basis.len();
        let mut rows = Matrix::zeros(k, free.len());
        for (r, row) in basis.rows.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                rows[(r, c)] = v;
            }
        }
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate("row factorization produced non-finite values".into()));
        }
        Ok(AffineProjector {
            shape: sys.shape,
            free,
            base,
            rows,
            rhs: Vector::from_vec(basis.rhs),
            dropped,
        })
    }

    /// Indices of general constraints discarded as dependent (and consistent).
    pub fn dropped(&self) -> &[usize] {
        &self.dropped
    }

    /// Number of independent general rows kept.
    pub fn rank(&self) -> usize {
        self.rows.nrows()
    }

    pub fn free_count(&self) -> usize {
        self.free.len()
    }

    pub fn apply(&self, x: &Matrix) -> Matrix {
        let (_, n2) = self.shape;
        let mut out = self.base.clone();
        let mut xf = Vector::from_iterator(
            self.free.len(),
            self.free.iter().map(|&f| x[(f / n2, f % n2)]),
        );
        if self.rows.nrows() > 0 {
            let resid = &self.rows * &xf - &self.rhs;
            xf -= self.rows.tr_mul(&resid);
        }
        for (k, &f) in self.free.iter().enumerate() {
            out[(f / n2, f % n2)] = xf[k];
        }
        out
    }
}

/// Indices of `candidates` whose rows, restricted to coordinates not listed in
/// `pinned`, are linearly independent of `base` and of earlier accepted
/// candidates. Dependent candidates add nothing to the feasible set when they
/// agree with it and make it empty when they do not.
pub fn independent_constraints(
    shape: (usize, usize),
    pinned: &[Entry],
    base: &[LinearConstraint],
    candidates: &[LinearConstraint],
) -> Vec<usize> {
    let (n1, n2) = shape;
    let mut is_pinned = vec![false; n1 * n2];
    for &(i, j) in pinned {
        is_pinned[i * n2 + j] = true;
    }
    let mut free_pos = vec![None; n1 * n2];
    let mut width = 0;
    for flat in 0..n1 * n2 {
        if !is_pinned[flat] {
            free_pos[flat] = Some(width);
            width += 1;
        }
    }
    let zeros = vec![0.0; n1 * n2];
    let mut basis = RowBasis::new(width);
    for c in base {
        let (row, _) = reduce_row(c, n2, &free_pos, &zeros, width);
        let norm = dot(&row, &row).sqrt();
        basis.push(row, 0.0, norm);
    }
    let mut kept = Vec::new();
    for (l, c) in candidates.iter().enumerate() {
        let (row, _) = reduce_row(c, n2, &free_pos, &zeros, width);
        let norm = dot(&row, &row).sqrt();
        if let RowOutcome::Added = basis.push(row, 0.0, norm) {
            kept.push(l);
        }
    }
    kept
}
