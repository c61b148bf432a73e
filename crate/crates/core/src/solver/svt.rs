use crate::linalg::Matrix;

/// Singular value thresholding, the proximal map of `τ‖·‖_*`:
/// `U max(Σ − τ, 0) Vᵀ`.
pub fn svt(x: &Matrix, tau: f64) -> Matrix {
    let (n1, n2) = x.shape();
    if n1 == 0 || n2 == 0 {
        return x.clone();
    }
    let svd = x.clone().svd(true, true);
    let u = svd.u.expect("left vectors requested");
    let vt = svd.v_t.expect("right vectors requested");
    let mut out = Matrix::zeros(n1, n2);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        let shrunk = s - tau;
        if shrunk > 0.0 {
            out.ger(shrunk, &u.column(k), &vt.row(k).transpose(), 1.0);
        }
    }
    out
}
