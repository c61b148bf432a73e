use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::powergrid::case::NetworkCase;

pub const SWEEP_TOLERANCE: f64 = 1e-12;
pub const MAX_SWEEPS: usize = 200;
/// Nodal power balance required of an accepted solution.
pub const MISMATCH_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerFlowSolution {
    /// Complex bus voltages in canonical bus order.
    #[serde(serialize_with = "serialize_complex")]
    pub voltages: Vec<Complex64>,
    /// Largest nodal power mismatch `|V_s conj(I_s) + S_load|` over load buses.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn serialize_complex<S: serde::Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for z in v {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

/// Series current of every line (from end to to end) for the given voltages.
pub fn line_currents(case: &NetworkCase, voltages: &[Complex64]) -> Vec<Complex64> {
    case.lines()
        .iter()
        .map(|l| (voltages[l.from] - voltages[l.to]) * l.admittance())
        .collect()
}

/// Net current injected at each bus: outgoing minus incoming line currents.
pub fn bus_injections(case: &NetworkCase, currents: &[Complex64]) -> Vec<Complex64> {
    let mut inj = vec![Complex64::new(0.0, 0.0); case.n_buses()];
    for (l, line) in case.lines().iter().enumerate() {
        inj[line.from] += currents[l];
        inj[line.to] -= currents[l];
    }
    inj
}

/// Largest `|V_s conj(I_s) + S_load,s|` over non-slack buses.
pub fn power_mismatch(case: &NetworkCase, voltages: &[Complex64]) -> f64 {
    let inj = bus_injections(case, &line_currents(case, voltages));
    case.buses()
        .iter()
        .enumerate()
        .skip(1)
        .map(|(s, b)| (voltages[s] * inj[s].conj() + Complex64::new(b.p_load, b.q_load)).norm())
        .fold(0.0, f64::max)
}

/// Backward/forward sweep: load currents are summed toward the slack, then
/// voltages are updated outward from it, until the largest voltage change is
/// below [`SWEEP_TOLERANCE`].
pub fn solve_power_flow(case: &NetworkCase) -> Result<PowerFlowSolution> {
    let n = case.n_buses();
    let v1 = case.slack_voltage();
    let mut v = vec![v1; n];
    let mut delta = f64::INFINITY;
    let mut iterations = 0;
    while iterations < MAX_SWEEPS {
        iterations += 1;
        // canonical order puts every child after its parent, so a reverse
        // scan accumulates subtree currents
        let mut branch: Vec<Complex64> = case
            .buses()
            .iter()
            .zip(&v)
            .map(|(b, &vs)| (Complex64::new(b.p_load, b.q_load) / vs).conj())
            .collect();
        for (l, line) in case.lines().iter().enumerate().rev() {
            let j = branch[line.to];
            branch[line.from] += j;
            debug_assert_eq!(line.to, l + 1);
        }
        let mut next = vec![v1; n];
        for line in case.lines() {
            next[line.to] = next[line.from] - line.impedance() * branch[line.to];
        }
        delta = v
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        v = next;
        if !delta.is_finite() || v.iter().any(|z| !(z.norm() > 0.0)) {
            return Err(Error::NoSolution {
                residual: f64::INFINITY,
                iterations,
            });
        }
        if delta < SWEEP_TOLERANCE {
            break;
        }
    }
    let residual = power_mismatch(case, &v);
    if delta >= SWEEP_TOLERANCE || !(residual <= MISMATCH_TOLERANCE) {
        return Err(Error::NoSolution {
            residual: if delta >= SWEEP_TOLERANCE { delta } else { residual },
            iterations,
        });
    }
    Ok(PowerFlowSolution {
        voltages: v,
        residual,
        iterations,
        converged: true,
    })
}
