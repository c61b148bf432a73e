use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::powergrid::{col, StateLayout};
use crate::solver::Entry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    UniformPrefix,
    Bernoulli,
    Grid,
}

/// Observed locations; values are read from the truth when needed.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    shape: (usize, usize),
    entries: Vec<Entry>,
    provenance: Provenance,
}

impl ObservationSet {
    pub fn new(shape: (usize, usize), entries: Vec<Entry>, provenance: Provenance) -> Result<Self> {
        let mut seen = vec![false; shape.0 * shape.1];
        for &(i, j) in &entries {
            if i >= shape.0 || j >= shape.1 {
                return Err(Error::dims(format!("entry ({i}, {j}) outside {shape:?}")));
            }
            if std::mem::replace(&mut seen[i * shape.1 + j], true) {
                return Err(Error::input(format!("entry ({i}, {j}) listed twice")));
            }
        }
        Ok(ObservationSet {
            shape,
            entries,
            provenance,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Row-major membership mask.
    pub fn mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.shape.0 * self.shape.1];
        for &(i, j) in &self.entries {
            mask[i * self.shape.1 + j] = true;
        }
        mask
    }

    pub fn values(&self, truth: &Matrix) -> Result<Vec<(Entry, f64)>> {
        if truth.shape() != self.shape {
            return Err(Error::dims(format!(
                "truth is {:?}, observations are over {:?}",
                truth.shape(),
                self.shape
            )));
        }
        Ok(self.entries.iter().map(|&e| (e, truth[e])).collect())
    }
}

/// Seeded Fisher-Yates permutation of every location not in `exclude`.
pub fn uniform_permutation(shape: (usize, usize), seed: u64, exclude: &[Entry]) -> Vec<Entry> {
    let (n1, n2) = shape;
    let mut excluded = vec![false; n1 * n2];
    for &(i, j) in exclude {
        if i < n1 && j < n2 {
            excluded[i * n2 + j] = true;
        }
    }
    let mut eligible: Vec<Entry> = (0..n1 * n2)
        .filter(|&f| !excluded[f])
        .map(|f| (f / n2, f % n2))
        .collect();
    eligible.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    eligible
}

/// The first `m` locations of the seeded permutation, so that growing `m`
/// only appends.
pub fn uniform_entries(
    shape: (usize, usize),
    m: usize,
    seed: u64,
    exclude: &[Entry],
) -> Result<ObservationSet> {
    let mut perm = uniform_permutation(shape, seed, exclude);
    if m > perm.len() {
        return Err(Error::input(format!(
            "cannot sample {m} of {} eligible locations",
            perm.len()
        )));
    }
    perm.truncate(m);
    ObservationSet::new(shape, perm, Provenance::UniformPrefix)
}

/// Each location independently with probability `m / (n1 n2)`.
pub fn bernoulli_entries(shape: (usize, usize), m: usize, seed: u64) -> Result<ObservationSet> {
    let total = shape.0 * shape.1;
    if m > total {
        return Err(Error::input(format!("m = {m} exceeds {total} locations")));
    }
    let p = if total == 0 { 0.0 } else { m as f64 / total as f64 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries = (0..total)
        .filter(|_| rng.random_bool(p))
        .map(|f| (f / shape.1, f % shape.1))
        .collect();
    ObservationSet::new(shape, entries, Provenance::Bernoulli)
}

/// Columns revealed at a sampled (non-PMU) bus.
pub const SAMPLED_BUS_COLUMNS: [usize; 4] = [col::P, col::Q, col::ABS_V, col::ABS_I];
/// Columns revealed at a sampled line.
pub const SAMPLED_LINE_COLUMNS: [usize; 5] =
    [col::P_FROM, col::Q_FROM, col::P_TO, col::Q_TO, col::LINE_ABS_I];

/// Number of sampled units for a fraction of the non-PMU buses and lines.
pub fn grid_unit_count(layout: &StateLayout, fraction: f64, n_pmu: usize) -> usize {
    let units = layout.n_buses - n_pmu + layout.n_lines;
    // guard against 0.22 × 100 landing a hair above 22
    ((fraction * units as f64 - 1e-9).ceil().max(0.0) as usize).min(units)
}

/// PMU buses (canonical indices) reveal their whole bus row. The remaining
/// buses and all lines are permuted and the first
/// `⌈fraction × (n_b − #pmu + n_l)⌉` of them are revealed: power and
/// magnitude columns only.
pub fn grid_sample(
    layout: &StateLayout,
    fraction: f64,
    seed: u64,
    pmu_buses: &[usize],
) -> Result<ObservationSet> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::input(format!("fraction must lie in [0, 1], got {fraction}")));
    }
    let mut is_pmu = vec![false; layout.n_buses];
    for &b in pmu_buses {
        if b >= layout.n_buses {
            return Err(Error::input(format!("PMU bus index {b} out of range")));
        }
        if std::mem::replace(&mut is_pmu[b], true) {
            return Err(Error::input(format!("PMU bus index {b} listed twice")));
        }
    }
    let mut entries = Vec::new();
    for &b in pmu_buses {
        entries.extend((0..8).map(|c| (layout.bus_row(b), c)));
    }
    // units: buses first, then lines, as state-matrix rows
    let mut units: Vec<usize> = (0..layout.n_buses)
        .filter(|&b| !is_pmu[b])
        .map(|b| layout.bus_row(b))
        .chain((0..layout.n_lines).map(|k| layout.line_row(k)))
        .collect();
    units.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let take = grid_unit_count(layout, fraction, pmu_buses.len());
    for &row in &units[..take] {
        if row < layout.n_buses {
            entries.extend(SAMPLED_BUS_COLUMNS.iter().map(|&c| (row, c)));
        } else {
            entries.extend(SAMPLED_LINE_COLUMNS.iter().map(|&c| (row, c)));
        }
    }
    ObservationSet::new(layout.shape(), entries, Provenance::Grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_prefix_and_extremes() {
        let shape = (6, 5);
        let all = uniform_entries(shape, 30, 3, &[]).unwrap();
        assert_eq!(all.len(), 30);
        assert_eq!(all.entries(), &uniform_permutation(shape, 3, &[])[..]);
        assert!(uniform_entries(shape, 0, 3, &[]).unwrap().is_empty());
        let a = uniform_entries(shape, 10, 9, &[]).unwrap();
        let b = uniform_entries(shape, 20, 9, &[]).unwrap();
        assert_eq!(a.entries(), &b.entries()[..10]);
        assert!(uniform_entries(shape, 31, 3, &[]).is_err());
        let ex = uniform_entries(shape, 28, 1, &[(0, 0), (5, 4)]).unwrap();
        assert!(!ex.entries().contains(&(0, 0)) && !ex.entries().contains(&(5, 4)));
    }

    #[test]
    fn bernoulli_extremes() {
        assert_eq!(bernoulli_entries((4, 5), 20, 0).unwrap().len(), 20);
        assert!(bernoulli_entries((4, 5), 0, 0).unwrap().is_empty());
        assert!(bernoulli_entries((4, 5), 21, 0).is_err());
    }

    #[test]
    fn grid_sampling_counts() {
        let layout = StateLayout { n_buses: 5, n_lines: 4 };
        let s = grid_sample(&layout, 0.0, 1, &[0]).unwrap();
        assert_eq!(s.entries(), &(0..8).map(|c| (0, c)).collect::<Vec<_>>()[..]);

        let s = grid_sample(&layout, 1.0, 1, &[0]).unwrap();
        assert_eq!(s.len(), 8 + 4 * 4 + 4 * 5);
        for &(i, j) in s.entries() {
            assert!(!layout.is_structural_zero(i, j));
            if i > 0 && i < 5 {
                assert!(SAMPLED_BUS_COLUMNS.contains(&j));
            }
        }

        let layout = StateLayout { n_buses: 141, n_lines: 140 };
        // 279 units; ⌈0.22 × 279⌉ = 62
        assert_eq!(grid_unit_count(&layout, 0.22, 2), 62);
        let s = grid_sample(&layout, 0.22, 4, &[0, 79]).unwrap();
        let buses = s.entries().iter().filter(|e| e.0 < 141 && e.0 != 0 && e.0 != 79).count() / 4;
        let lines = s.entries().iter().filter(|e| e.0 >= 141).count() / 5;
        assert_eq!(buses + lines, 62);
        assert_eq!(s.len(), 16 + 4 * buses + 5 * lines);

        assert!(grid_sample(&layout, 1.5, 0, &[0]).is_err());
        assert!(grid_sample(&layout, 0.5, 0, &[141]).is_err());
    }

    #[test]
    fn duplicates_rejected() {
        assert!(ObservationSet::new((2, 2), vec![(0, 0), (0, 0)], Provenance::Grid).is_err());
    }
}
