//! Sample-size lower bounds for exact recovery with linear equality
//! constraints, and the two limiting-case checks.
//!
//! The bounds contain two universal constants (`C_R`, `C_K`) whose values are
//! unknown; callers supply them. [`BoundConstants::illustrative`] sets both to 1
//! purely so the formulas can be evaluated.

use std::f64::consts::E;

use serde::Serialize;

use crate::error::{Error, Result};

/// `r(n1 + n2 − r)`, the degrees of freedom of an `n1 × n2` rank-`r` matrix.
pub fn degrees_of_freedom(n1: usize, n2: usize, r: usize) -> Result<usize> {
    if r == 0 || r > n1.min(n2) {
        return Err(Error::InvalidRank {
            rank: r,
            rows: n1,
            cols: n2,
        });
    }
    Ok(r * (n1 + n2 - r))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundConstants {
    pub c_r: f64,
    pub c_k: f64,
    /// False when the values are placeholders rather than known constants.
    pub calibrated: bool,
}

impl BoundConstants {
    /// `C_R = C_K = 1`; illustrative only.
    pub fn illustrative() -> Self {
        BoundConstants {
            c_r: 1.0,
            c_k: 1.0,
            calibrated: false,
        }
    }

    pub fn new(c_r: f64, c_k: f64) -> Self {
        BoundConstants {
            c_r,
            c_k,
            calibrated: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundInputs {
    pub n1: usize,
    pub n2: usize,
    pub r: usize,
    pub mu0: f64,
    pub nu0: f64,
    pub mu_q_perp: f64,
    pub nu_q_perp: f64,
    /// Probability exponent; the guarantee holds with probability `1 − 6 n1^−β`.
    pub beta: f64,
    /// Weight of the constraint projector in the certificate construction.
    pub q: f64,
}

impl BoundInputs {
    fn validate(&self) -> Result<()> {
        if self.n2 == 0 || self.n1 < self.n2 || self.n1 < 2 {
            return Err(Error::input(format!(
                "bounds need n1 ≥ n2 ≥ 1 and n1 ≥ 2, got {}x{}",
                self.n1, self.n2
            )));
        }
        if self.r == 0 || self.r > self.n2 {
            return Err(Error::InvalidRank {
                rank: self.r,
                rows: self.n1,
                cols: self.n2,
            });
        }
        if !(self.beta >= 1.0) {
            return Err(Error::input(format!("beta must be ≥ 1, got {}", self.beta)));
        }
        if !(self.q > 0.0) || !self.q.is_finite() {
            return Err(Error::input(format!("q must be positive, got {}", self.q)));
        }
        if !(self.mu0 > 0.0 && self.nu0 > 0.0) {
            return Err(Error::input("mu0 and nu0 must be positive"));
        }
        for (name, v) in [("mu_q_perp", self.mu_q_perp), ("nu_q_perp", self.nu_q_perp)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::input(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

/// Right-hand sides of the six sample-size inequalities. Entries 0 and 1 are
/// strict (`m > rhs`), the rest are inclusive (`m ≥ rhs`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem1Bounds {
    pub rhs: [f64; 6],
    pub strict: [bool; 6],
    /// Index of the largest right-hand side.
    pub binding: usize,
    pub max: f64,
    pub constants: BoundConstants,
}

impl Theorem1Bounds {
    /// True when `m` satisfies every inequality.
    pub fn admits(&self, m: f64) -> bool {
        self.rhs
            .iter()
            .zip(self.strict)
            .all(|(&rhs, strict)| if strict { m > rhs } else { m >= rhs })
    }
}

pub fn theorem1_bounds(inputs: &BoundInputs, constants: BoundConstants) -> Result<Theorem1Bounds> {
    inputs.validate()?;
    if !(constants.c_r > 0.0 && constants.c_k > 0.0) {
        return Err(Error::input("constants must be positive"));
    }
    let n1 = inputs.n1 as f64;
    let n2 = inputs.n2 as f64;
    let r = inputs.r as f64;
    let BoundInputs {
        mu0,
        nu0,
        mu_q_perp,
        nu_q_perp,
        beta,
        q,
        ..
    } = *inputs;
    let BoundConstants { c_r, c_k, .. } = constants;
    let log_n1 = n1.ln();
    let qnn = q * n1 * n2;
    let spread = (beta * r * n1 * log_n1).sqrt();

    let a = {
        let first = c_k * E * E * nu0 * spread * 2f64.powf(2.0 / (beta * log_n1) + 2.5);
        let second = 2.0 * (qnn * (nu_q_perp * r).sqrt()).sqrt();
        (first + second).powi(2) - qnn
    };
    let b = (10.0 * mu0 * r * n1 * n2).sqrt()
        * (c_r * spread + n1 * n2 * (mu_q_perp * q).sqrt())
        * (1.0 + q.sqrt())
        - qnn;
    let c = 16.0 * c_r * c_r * beta * mu0 * r * n1 * log_n1 - qnn;
    let d = 16.0 * mu_q_perp * mu0 * q * n1 * n1 * n2 * n2 - qnn;
    let e = qnn * (nu_q_perp * r).sqrt() - qnn;
    let f = beta.max(2.0) * n1 * log_n1;

    let rhs = [a, b, c, d, e, f];
    let mut binding = 0;
    for k in 1..6 {
        if rhs[k] > rhs[binding] {
            binding = k;
        }
    }
    Ok(Theorem1Bounds {
        rhs,
        strict: [true, true, false, false, false, false],
        binding,
        max: rhs[binding],
        constants,
    })
}

/// Outcome of the near-full-coverage condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Corollary1Check {
    pub passes: bool,
    /// `min{1/2⁴, 1/(10r)} / (μ₀ n1 n2)`.
    pub mu_threshold: f64,
    /// `1/(2⁴ r)`.
    pub nu_threshold: f64,
    /// Threshold minus value; positive means the branch holds.
    pub mu_margin: f64,
    pub nu_margin: f64,
}

pub fn corollary1_check(
    mu0: f64,
    r: usize,
    n1: usize,
    n2: usize,
    mu_q_perp: f64,
    nu_q_perp: f64,
) -> Corollary1Check {
    let rf = r as f64;
    let mu_threshold = (1.0f64 / 16.0).min(1.0 / (10.0 * rf)) / (mu0 * (n1 * n2) as f64);
    let nu_threshold = 1.0 / (16.0 * rf);
    let mu_margin = mu_threshold - mu_q_perp;
    let nu_margin = nu_threshold - nu_q_perp;
    Corollary1Check {
        passes: mu_margin > 0.0 && nu_margin > 0.0,
        mu_threshold,
        nu_threshold,
        mu_margin,
        nu_margin,
    }
}

/// Sample-size bound (strict) when `Q` covers none of `T`
/// (`μ_Q⊥ = ν_Q⊥ = 1`):
/// `max{C1 ν₀² β r, C2 √(μ₀ n2) β r, C3 μ₀ β r, 2, β} n1 log n1`.
pub fn corollary2_bound(
    n1: usize,
    n2: usize,
    r: usize,
    mu0: f64,
    nu0: f64,
    beta: f64,
    constants: BoundConstants,
) -> Result<f64> {
    BoundInputs {
        n1,
        n2,
        r,
        mu0,
        nu0,
        mu_q_perp: 1.0,
        nu_q_perp: 1.0,
        beta,
        q: 1.0,
    }
    .validate()?;
    let n1f = n1 as f64;
    let rf = r as f64;
    let log_n1 = n1f.ln();
    let c1 = 32.0 * constants.c_k.powi(2) * E.powi(4) * 2f64.powf(4.0 / (beta * log_n1));
    let c2 = 10f64.sqrt() * constants.c_r;
    let c3 = 16.0 * constants.c_r.powi(2);
    let factor = [
        c1 * nu0 * nu0 * beta * rf,
        c2 * (mu0 * n2 as f64).sqrt() * beta * rf,
        c3 * mu0 * beta * rf,
        2.0,
        beta,
    ]
    .into_iter()
    .fold(f64::MIN, f64::max);
    Ok(factor * n1f * log_n1)
}
