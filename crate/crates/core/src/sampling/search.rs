use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::sampling::observe::uniform_permutation;
use crate::solver::{
    assemble_affine, exact_recovery, solve_least_squares, solve_nuclear, Entry, LinearConstraint,
    SolverConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Nuclear,
    LeastSquares,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMode {
    /// Try every `m` from 0 upward.
    UnitStep,
    /// Exponential steps away from a starting guess, then bisection down to a
    /// single sample. Gives the unit-step answer whenever success is monotone
    /// in `m`, which holds for exact solves since adding samples keeps the
    /// truth the unique optimum.
    Galloping,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub target_success: f64,
    pub trials: usize,
    pub base_seed: u64,
    pub mode: SearchMode,
    /// First `m` tried by the galloping search; defaults to the answer of
    /// trial 0 found from `n1 n2 / 2`.
    pub start: Option<usize>,
    pub method: Method,
    pub solver: SolverConfig,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            target_success: 0.9,
            trials: 100,
            base_seed: 0,
            mode: SearchMode::Galloping,
            start: None,
            method: Method::Nuclear,
            solver: SolverConfig::default(),
        }
    }
}

impl SearchConfig {
    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::input("trials must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.target_success) {
            return Err(Error::input(format!(
                "target_success must lie in [0, 1], got {}",
                self.target_success
            )));
        }
        self.solver.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    /// Smallest `m` whose success fraction reaches the target; `None` when
    /// even full observation falls short.
    pub min_samples: Option<usize>,
    /// Per-trial smallest recovering `m` (`None`: not recovered at all).
    pub per_trial: Vec<Option<usize>>,
    /// Success fraction for `m = 0..=n1 n2`.
    pub curve: Vec<f64>,
    pub solves: usize,
}

impl SearchResult {
    pub fn saturated(&self) -> bool {
        self.min_samples.is_none()
    }
}

/// Whether observing the first `m` entries of `perm` recovers `truth`.
pub fn recovers(
    truth: &Matrix,
    constraints: &[LinearConstraint],
    perm: &[Entry],
    m: usize,
    method: Method,
    solver: &SolverConfig,
) -> Result<bool> {
    let obs: Vec<(Entry, f64)> = perm[..m].iter().map(|&e| (e, truth[e])).collect();
    let sys = assemble_affine(truth.shape(), &obs, constraints.to_vec())?;
    let report = match method {
        Method::Nuclear => solve_nuclear(&sys, solver)?,
        Method::LeastSquares => solve_least_squares(&sys)?,
    };
    exact_recovery(&report.solution, truth, solver.exactness_tolerance)
}

struct TrialSearch<'a> {
    truth: &'a Matrix,
    constraints: &'a [LinearConstraint],
    perm: Vec<Entry>,
    config: &'a SearchConfig,
    solves: usize,
}

impl TrialSearch<'_> {
    fn test(&mut self, m: usize) -> Result<bool> {
        self.solves += 1;
        recovers(
            self.truth,
            self.constraints,
            &self.perm,
            m,
            self.config.method,
            &self.config.solver,
        )
    }

    fn unit_step(&mut self) -> Result<Option<usize>> {
        for m in 0..=self.perm.len() {
            if self.test(m)? {
                return Ok(Some(m));
            }
        }
        Ok(None)
    }

    fn galloping(&mut self, start: usize) -> Result<Option<usize>> {
        let total = self.perm.len();
        let start = start.min(total);
        // bracket: fail at lo (or lo is None meaning "below 0"), success at hi
        let (lo, mut hi): (Option<usize>, usize);
        if self.test(start)? {
            hi = start;
            let mut step = 1;
            loop {
                if hi == 0 {
                    return Ok(Some(0));
                }
                let probe = hi.saturating_sub(step);
                if self.test(probe)? {
                    hi = probe;
                    step *= 2;
                } else {
                    lo = Some(probe);
                    break;
                }
            }
        } else {
            let mut fail = start;
            let mut step = 1;
            loop {
                if fail == total {
                    return Ok(None);
                }
                let probe = (fail + step).min(total);
                if self.test(probe)? {
                    hi = probe;
                    lo = Some(fail);
                    break;
                }
                fail = probe;
                step *= 2;
            }
        }
        let mut lo = lo.expect("bracket has a failing end");
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.test(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(Some(hi))
    }
}

fn run_trial(
    truth: &Matrix,
    constraints: &[LinearConstraint],
    config: &SearchConfig,
    trial: usize,
    start: usize,
) -> Result<(Option<usize>, usize)> {
    let perm = uniform_permutation(truth.shape(), config.base_seed + trial as u64, &[]);
    let mut search = TrialSearch {
        truth,
        constraints,
        perm,
        config,
        solves: 0,
    };
    let found = match config.mode {
        SearchMode::UnitStep => search.unit_step()?,
        SearchMode::Galloping => search.galloping(start)?,
    };
    Ok((found, search.solves))
}

/// Success curve over permutation prefixes and the smallest sample count
/// reaching `target_success`. Trial `k` uses permutation seed
/// `base_seed + k`.
pub fn min_samples_search(
    truth: &Matrix,
    constraints: &[LinearConstraint],
    config: &SearchConfig,
) -> Result<SearchResult> {
    config.validate()?;
    let total = truth.nrows() * truth.ncols();
    let mut solves = 0;
    let start = match config.start {
        Some(s) => s,
        None if config.mode == SearchMode::Galloping => {
            let (first, n) = run_trial(truth, constraints, config, 0, total / 2)?;
            solves += n;
            first.unwrap_or(total)
        }
        None => 0,
    };
    let outcomes: Vec<(Option<usize>, usize)> = (0..config.trials)
        .into_par_iter()
        .map(|k| run_trial(truth, constraints, config, k, start))
        .collect::<Result<_>>()?;
    solves += outcomes.iter().map(|o| o.1).sum::<usize>();
    let per_trial: Vec<Option<usize>> = outcomes.into_iter().map(|o| o.0).collect();

    let mut counts = vec![0usize; total + 1];
    for m in per_trial.iter().flatten() {
        counts[*m] += 1;
    }
    let mut curve = Vec::with_capacity(total + 1);
    let mut acc = 0;
    for c in counts {
        acc += c;
        curve.push(acc as f64 / config.trials as f64);
    }
    let min_samples = curve.iter().position(|&p| p >= config.target_success);
    Ok(SearchResult {
        min_samples,
        per_trial,
        curve,
        solves,
    })
}
