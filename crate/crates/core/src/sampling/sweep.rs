use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::search::{min_samples_search, SearchConfig};
use crate::sampling::toy::{generate_toy_instance, generate_tuned_constraints};
use crate::subspace::{
    mu_q_perp, nu_q_perp, truncated_svd, ConstraintSpaceQ, RankSelection, SubspaceT,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyConfig {
    pub n1: usize,
    pub n2: usize,
    pub r: usize,
    /// Constraints per mix; `None` means `dim T`.
    pub count: Option<usize>,
    pub instance_seed: u64,
    pub constraint_seed: u64,
    pub search: SearchConfig,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            n1: 40,
            n2: 10,
            r: 2,
            count: None,
            instance_seed: 0,
            constraint_seed: 1,
            search: SearchConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixRow {
    /// `None` for the unconstrained baseline.
    pub mix: Option<f64>,
    pub mu_q_perp: f64,
    pub nu_q_perp: f64,
    pub constraint_dim: usize,
    pub min_samples: Option<usize>,
    /// Per-trial minimum sample counts (`None`: never recovered).
    pub per_trial: Vec<Option<usize>>,
    pub solves: usize,
}

/// Baseline row (no constraints) followed by one row per mix, all on the same
/// truth matrix, the same constraint draws and the same permutations.
pub fn constraint_mix_sweep(config: &ToyConfig, mixes: &[f64]) -> Result<Vec<MixRow>> {
    if let Some(bad) = mixes.iter().find(|m| !(0.0..=1.0).contains(*m)) {
        return Err(Error::input(format!("mix must lie in [0, 1], got {bad}")));
    }
    let (n1, n2, r) = (config.n1, config.n2, config.r);
    let truth = generate_toy_instance(n1, n2, r, config.instance_seed)?;
    let factors = truncated_svd(&truth, RankSelection::Fixed(r))?;
    let t = SubspaceT::from_factors(&factors);

    let baseline = min_samples_search(&truth, &[], &config.search)?;
    let mut rows = vec![MixRow {
        mix: None,
        mu_q_perp: 1.0,
        nu_q_perp: 1.0,
        constraint_dim: 0,
        min_samples: baseline.min_samples,
        per_trial: baseline.per_trial,
        solves: baseline.solves,
    }];
    for &mix in mixes {
        let cons = generate_tuned_constraints(&truth, r, config.count, mix, config.constraint_seed)?;
        let q = ConstraintSpaceQ::from_constraints(n1, n2, &cons)?;
        let res = min_samples_search(&truth, &cons, &config.search)?;
        rows.push(MixRow {
            mix: Some(mix),
            mu_q_perp: mu_q_perp(&t, &q)?,
            nu_q_perp: nu_q_perp(&factors, &q)?,
            constraint_dim: q.effective_dim(),
            min_samples: res.min_samples,
            per_trial: res.per_trial,
            solves: res.solves,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_sweep_shape() {
        let cfg = ToyConfig {
            n1: 10,
            n2: 6,
            r: 1,
            search: SearchConfig {
                trials: 6,
                ..SearchConfig::default()
            },
            ..ToyConfig::default()
        };
        let rows = constraint_mix_sweep(&cfg, &[0.0, 1.0]).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].mix, None);
        for row in &rows {
            assert!((0.0..=1.0).contains(&row.mu_q_perp));
            assert!((0.0..=1.0).contains(&row.nu_q_perp));
        }
        assert_eq!(rows[2].constraint_dim, 15);
        assert!(rows[2].min_samples.unwrap() < rows[0].min_samples.unwrap());
        assert!(constraint_mix_sweep(&cfg, &[1.5]).is_err());
    }
}
