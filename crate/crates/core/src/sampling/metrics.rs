use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::powergrid::{col, StateMatrix};
use crate::sampling::observe::ObservationSet;

/// Voltage errors over unobserved buses; `None` when no bus qualifies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VoltageRmse {
    /// pu, over buses whose `|V|` entry was not observed.
    pub magnitude: Option<f64>,
    /// Degrees, over buses with an unobserved real or imaginary part.
    pub angle: Option<f64>,
}

/// Wraps an angle difference in degrees into `(−180, 180]`.
pub fn wrap_degrees(d: f64) -> f64 {
    let w = d.rem_euclid(360.0);
    if w > 180.0 {
        w - 360.0
    } else {
        w
    }
}

fn rms(sum_sq: f64, n: usize) -> Option<f64> {
    (n > 0).then(|| (sum_sq / n as f64).sqrt())
}

pub fn rmse_voltage(
    estimate: &Matrix,
    truth: &StateMatrix,
    observed: &ObservationSet,
) -> Result<VoltageRmse> {
    let t = truth.values();
    if estimate.shape() != t.shape() || observed.shape() != t.shape() {
        return Err(Error::dims(format!(
            "estimate {:?}, truth {:?}, observations {:?}",
            estimate.shape(),
            t.shape(),
            observed.shape()
        )));
    }
    let mask = observed.mask();
    let n2 = t.ncols();
    let seen = |i: usize, j: usize| mask[i * n2 + j];
    let (mut mag_sq, mut mag_n, mut ang_sq, mut ang_n) = (0.0, 0, 0.0, 0);
    for s in 0..truth.layout().n_buses {
        let row = truth.layout().bus_row(s);
        if !seen(row, col::ABS_V) {
            mag_sq += (estimate[(row, col::ABS_V)] - t[(row, col::ABS_V)]).powi(2);
            mag_n += 1;
        }
        if !seen(row, col::RE_V) || !seen(row, col::IM_V) {
            let est = estimate[(row, col::IM_V)].atan2(estimate[(row, col::RE_V)]);
            let tru = t[(row, col::IM_V)].atan2(t[(row, col::RE_V)]);
            ang_sq += wrap_degrees((est - tru).to_degrees()).powi(2);
            ang_n += 1;
        }
    }
    Ok(VoltageRmse {
        magnitude: rms(mag_sq, mag_n),
        angle: rms(ang_sq, ang_n),
    })
}

/// Fractions of defined values at or below each threshold; `None` when
/// every value is undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdFractions {
    pub magnitude: Option<f64>,
    pub angle: Option<f64>,
}

fn fraction_below(values: impl Iterator<Item = Option<f64>>, threshold: f64) -> Option<f64> {
    let (mut hit, mut n) = (0usize, 0usize);
    for v in values.flatten() {
        n += 1;
        if v <= threshold {
            hit += 1;
        }
    }
    (n > 0).then(|| hit as f64 / n as f64)
}

pub fn threshold_probability(
    rmse: &[VoltageRmse],
    mag_threshold: f64,
    ang_threshold: f64,
) -> Result<ThresholdFractions> {
    if rmse.is_empty() {
        return Err(Error::input("no trial results"));
    }
    Ok(ThresholdFractions {
        magnitude: fraction_below(rmse.iter().map(|r| r.magnitude), mag_threshold),
        angle: fraction_below(rmse.iter().map(|r| r.angle), ang_threshold),
    })
}

/// Sorted `(value, fraction ≤ value)` pairs over the defined values.
pub fn empirical_cdf(values: &[Option<f64>]) -> Vec<(f64, f64)> {
    let mut v: Vec<f64> = values.iter().flatten().copied().collect();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
    for (k, x) in v.iter().enumerate() {
        let frac = (k + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *x => last.1 = frac,
            _ => out.push((*x, frac)),
        }
    }
    out
}

/// Median of the defined values.
pub fn median(values: &[Option<f64>]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().flatten().copied().collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::powergrid::{assemble_state_matrix, generate_radial_case, solve_power_flow, StateLayout};
    use crate::sampling::observe::{grid_sample, Provenance};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn state() -> StateMatrix {
        let case = generate_radial_case(8, 1, 0.05).unwrap();
        assemble_state_matrix(&case, &solve_power_flow(&case).unwrap()).unwrap()
    }

    #[test]
    fn wrapping() {
        assert_eq!(wrap_degrees(180.0), 180.0);
        assert_eq!(wrap_degrees(-180.0), 180.0);
        assert_eq!(wrap_degrees(190.0), -170.0);
        assert_eq!(wrap_degrees(-0.5), -0.5);
    }

    #[test]
    fn exact_estimate_is_zero() {
        let s = state();
        let obs = grid_sample(&s.layout(), 0.3, 2, &[0]).unwrap();
        let r = rmse_voltage(s.values(), &s, &obs).unwrap();
        assert_eq!(r.magnitude, Some(0.0));
        assert_eq!(r.angle, Some(0.0));
    }

    #[test]
    fn single_unobserved_bus() {
        let s = state();
        let layout = s.layout();
        let mut entries = Vec::new();
        for b in 0..layout.n_buses {
            for c in 0..8 {
                if b != 3 || c != col::ABS_V {
                    entries.push((b, c));
                }
            }
        }
        let obs = ObservationSet::new(layout.shape(), entries, Provenance::Grid).unwrap();
        let mut est = s.values().clone();
        est[(3, col::ABS_V)] += 0.01;
        let r = rmse_voltage(&est, &s, &obs).unwrap();
        assert!((r.magnitude.unwrap() - 0.01).abs() < 1e-15);
        assert_eq!(r.angle, None);
    }

    #[test]
    fn perturbation_matches_recomputation() {
        let s = state();
        let layout: StateLayout = s.layout();
        let obs = grid_sample(&layout, 0.4, 5, &[0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let est = s.values().map(|v| v + rng.random_range(-0.01..0.01));
        let r = rmse_voltage(&est, &s, &obs).unwrap();
        let mask = obs.mask();
        let (mut m, mut mn, mut a, mut an) = (0.0, 0, 0.0, 0);
        for b in 0..layout.n_buses {
            if !mask[b * 17 + 4] {
                m += (est[(b, 4)] - s.values()[(b, 4)]).powi(2);
                mn += 1;
            }
            if !mask[b * 17 + 2] || !mask[b * 17 + 3] {
                let d = est[(b, 3)].atan2(est[(b, 2)]) - s.values()[(b, 3)].atan2(s.values()[(b, 2)]);
                a += d.to_degrees().powi(2);
                an += 1;
            }
        }
        assert!((r.magnitude.unwrap() - (m / mn as f64).sqrt()).abs() < 1e-14);
        assert!((r.angle.unwrap() - (a / an as f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn threshold_counts() {
        let rm = |m: f64, a: f64| VoltageRmse {
            magnitude: Some(m),
            angle: Some(a),
        };
        let all_exact = vec![rm(0.0, 0.0); 4];
        let f = threshold_probability(&all_exact, 1e-4, 5e-5).unwrap();
        assert_eq!((f.magnitude, f.angle), (Some(1.0), Some(1.0)));
        let mixed = vec![rm(0.0, 1.0), rm(1e-5, 1e-6), rm(2e-4, 0.0), rm(1e-4, 4e-5)];
        let f = threshold_probability(&mixed, 1e-4, 5e-5).unwrap();
        assert_eq!((f.magnitude, f.angle), (Some(0.75), Some(0.75)));
        let f = threshold_probability(&mixed, 0.0, 0.0).unwrap();
        assert_eq!((f.magnitude, f.angle), (Some(0.25), Some(0.25)));
        let undefined = vec![VoltageRmse { magnitude: None, angle: Some(0.0) }, rm(1.0, 1.0)];
        let f = threshold_probability(&undefined, 0.5, 0.5).unwrap();
        assert_eq!((f.magnitude, f.angle), (Some(0.0), Some(0.5)));
        assert!(threshold_probability(&[], 1.0, 1.0).is_err());
    }

    #[test]
    fn cdf_and_median() {
        let v = [Some(3.0), None, Some(1.0), Some(1.0), Some(2.0)];
        assert_eq!(empirical_cdf(&v), vec![(1.0, 0.5), (2.0, 0.75), (3.0, 1.0)]);
        assert_eq!(median(&v), Some(1.5));
        assert_eq!(median(&[None]), None);
    }
}
