//! Run configuration.
//!
//! One TOML document. Top-level keys hold the base seed, the worker count,
//! strict mode and the `[solver]` table; each subcommand reads its own table.
//! Values resolve as: defaults, then the file, then `GRIDFILL_SEED`, then
//! command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gridfill::sampling::{GridMethod, Method, ProbeConfig, SearchMode};
use gridfill::solver::SolverConfig;
use gridfill::Error;
use serde::{Deserialize, Serialize};

pub const SEED_ENV: &str = "GRIDFILL_SEED";

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Base seed; trial `k` uses `seed + k`.
    pub seed: u64,
    /// Worker threads; all cores when unset.
    pub jobs: Option<usize>,
    /// Treat solver non-convergence as a failure (exit 4).
    pub strict: bool,
    pub solver: SolverConfig,
    pub solve: SolveSection,
    pub coherence: CoherenceSection,
    pub scree: ScreeSection,
    pub toy: ToySection,
    pub grid: GridSection,
    pub powerflow: PowerflowSection,
    pub network: NetworkSection,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSection {
    /// Matrix with NaN or empty cells for unobserved entries.
    pub matrix: Option<PathBuf>,
    /// `i,j,value` triples; needs `n1`/`n2` or a constraints file for the shape.
    pub observations: Option<PathBuf>,
    pub n1: Option<usize>,
    pub n2: Option<usize>,
    pub constraints: Option<PathBuf>,
    /// Ground truth; adds the relative error and recovery flag to the report.
    pub truth: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoherenceSection {
    pub matrix: Option<PathBuf>,
    pub constraints: Option<PathBuf>,
    /// Fixed rank; otherwise singular values below `1e-8 σ₁` are dropped.
    pub rank: Option<usize>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScreeSection {
    /// Matrix to analyze; the state matrix of `[network]` when unset.
    pub matrix: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToySection {
    pub n1: usize,
    pub n2: usize,
    pub r: usize,
    /// Constraints per mix; `dim T` when unset.
    pub count: Option<usize>,
    pub mixes: Vec<f64>,
    pub trials: usize,
    pub target_success: f64,
    pub instance_seed: u64,
    pub constraint_seed: u64,
    pub mode: SearchMode,
    pub start: Option<usize>,
    pub method: Method,
    pub output: Option<PathBuf>,
    /// Per-trial minimum sample counts.
    pub trials_output: Option<PathBuf>,
}

impl Default for ToySection {
    fn default() -> Self {
        ToySection {
            n1: 40,
            n2: 10,
            r: 2,
            count: None,
            mixes: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            trials: 100,
            target_success: 0.9,
            instance_seed: 0,
            constraint_seed: 1,
            mode: SearchMode::Galloping,
            start: None,
            method: Method::Nuclear,
            output: None,
            trials_output: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub fractions: Vec<f64>,
    pub trials: usize,
    /// Bus ids (as written in the case) carrying a PMU.
    pub pmu_buses: Vec<usize>,
    pub methods: Vec<GridMethod>,
    pub structural_zeros: bool,
    /// Magnitude RMSE threshold in pu.
    pub mag_threshold: f64,
    /// Angle RMSE threshold in degrees.
    pub angle_threshold: f64,
    pub output: Option<PathBuf>,
    pub cdf: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    /// Runs the constraint-deletion probe when set.
    pub probe_output: Option<PathBuf>,
    pub probe: ProbeConfig,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            fractions: vec![0.1, 0.2, 0.3],
            trials: 20,
            pmu_buses: vec![1],
            methods: GridMethod::ALL.to_vec(),
            structural_zeros: true,
            mag_threshold: 1e-4,
            angle_threshold: 5e-5,
            output: None,
            cdf: None,
            summary: None,
            probe_output: None,
            probe: ProbeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerflowSection {
    /// Bus voltages.
    pub output: Option<PathBuf>,
    /// Assembled state matrix.
    pub state: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

/// The network used by `grid`, `powerflow`, `scree` and `gen-network`: a case
/// file when `case` is set, a generated radial feeder otherwise.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    /// JSON case, or MATPOWER when the extension is `.m`.
    pub case: Option<PathBuf>,
    pub n_buses: usize,
    pub seed: u64,
    /// Upper end of the uniform per-bus load draw, in pu.
    pub load_scale: f64,
    /// Multiplies every load after loading or generating.
    pub load_factor: f64,
    /// Where `gen-network` writes the case.
    pub output: Option<PathBuf>,
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection {
            case: None,
            n_buses: 20,
            seed: 0,
            load_scale: 0.01,
            load_factor: 1.0,
            output: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(Error::from)
            .with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())).into())
    }

    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("{SEED_ENV}={v:?} is not a seed")))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn validate_common(&self) -> Result<()> {
        if self.jobs == Some(0) {
            bail!(Error::InvalidInput("jobs must be at least 1".into()));
        }
        Ok(self.solver.validate()?)
    }

    pub fn validate_network(&self) -> Result<()> {
        let n = &self.network;
        if n.case.is_none() && n.n_buses < 2 {
            bail!(Error::InvalidInput(format!("n_buses must be at least 2, got {}", n.n_buses)));
        }
        for (name, v) in [("load_scale", n.load_scale), ("load_factor", n.load_factor)] {
            if !(v >= 0.0) || !v.is_finite() {
                bail!(Error::InvalidInput(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    pub fn validate_toy(&self) -> Result<()> {
        let t = &self.toy;
        if t.r == 0 || t.r > t.n1.min(t.n2) {
            bail!(Error::InvalidRank {
                rank: t.r,
                rows: t.n1,
                cols: t.n2
            });
        }
        if t.trials == 0 {
            bail!(Error::InvalidInput("trials must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&t.target_success) {
            bail!(Error::InvalidInput(format!(
                "target_success must lie in [0, 1], got {}",
                t.target_success
            )));
        }
        if let Some(m) = t.mixes.iter().find(|m| !(0.0..=1.0).contains(*m)) {
            bail!(Error::InvalidInput(format!("mix must lie in [0, 1], got {m}")));
        }
        Ok(())
    }

    pub fn validate_grid(&self) -> Result<()> {
        let g = &self.grid;
        if g.trials == 0 {
            bail!(Error::InvalidInput("trials must be at least 1".into()));
        }
        if g.methods.is_empty() {
            bail!(Error::InvalidInput("no methods selected".into()));
        }
        if let Some(f) = g.fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
            bail!(Error::InvalidInput(format!("fraction must lie in [0, 1], got {f}")));
        }
        for (name, v) in [("mag_threshold", g.mag_threshold), ("angle_threshold", g.angle_threshold)] {
            if !(v >= 0.0) || !v.is_finite() {
                bail!(Error::InvalidInput(format!("{name} must be non-negative, got {v}")));
            }
        }
        let p = &g.probe;
        if p.rank == 0 {
            bail!(Error::InvalidInput("probe rank must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&p.fraction) {
            bail!(Error::InvalidInput(format!("probe fraction must lie in [0, 1], got {}", p.fraction)));
        }
        if let Some(k) = p.keep_fractions.iter().find(|k| !(0.0..=1.0).contains(*k)) {
            bail!(Error::InvalidInput(format!("keep fraction must lie in [0, 1], got {k}")));
        }
        self.validate_network()
    }
}

/// Fails with a bad-input error when a required path is missing.
pub fn required<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::InvalidInput(format!("missing {what}")).into())
}
