//! `gridfill` command-line driver.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | any other failure |
//! | 2 | bad arguments, unreadable or malformed input, invalid parameters |
//! | 3 | infeasible constraint system or conflicting observations |
//! | 4 | solver did not converge (only with `--strict`) |
//! | 5 | metric undefined for the input (e.g. zero matrix) |
//! | 6 | power flow has no solution |

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use gridfill::sampling::{GridMethod, Method, SearchMode};
use gridfill::Error;

mod commands;
mod config;
mod io;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "gridfill", version, about = "Constrained low-rank completion of grid state matrices")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed (overrides GRIDFILL_SEED and the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel trials.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Exit with code 4 when a solve does not converge.
    #[arg(long, global = true)]
    strict: bool,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SolverArgs {
    /// ADMM penalty parameter.
    #[arg(long, global = true)]
    rho: Option<f64>,
    #[arg(long, global = true)]
    max_iterations: Option<usize>,
    /// Primal and dual residual tolerance.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Relative Frobenius error counted as exact recovery.
    #[arg(long, global = true)]
    exactness_tolerance: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Nuclear-norm completion under observations and linear constraints.
    Solve(SolveArgs),
    /// Minimum-norm point of the same feasible set.
    LeastSquares(SolveArgs),
    /// Coherence and constraint-coverage metrics of a matrix.
    Coherence(CoherenceArgs),
    /// Normalized singular values of a matrix or a network state matrix.
    Scree(ScreeArgs),
    /// Minimum sample size against constraint mix on a random low-rank matrix.
    Toy(ToyArgs),
    /// Sampling experiment on a distribution network.
    Grid(GridArgs),
    /// Radial power flow and the resulting state matrix.
    Powerflow(PowerflowArgs),
    /// Writes a generated radial feeder as a JSON case.
    GenNetwork(GenNetworkArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Matrix CSV/JSON with empty or NaN cells for missing entries.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// `i,j,value` CSV with zero-based indices.
    #[arg(long)]
    observations: Option<PathBuf>,
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long)]
    n2: Option<usize>,
    /// Constraint JSON.
    #[arg(long)]
    constraints: Option<PathBuf>,
    /// Ground truth for the recovery check.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Solution CSV.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Report JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct CoherenceArgs {
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long)]
    constraints: Option<PathBuf>,
    #[arg(long)]
    rank: Option<usize>,
    /// Report JSON.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct NetworkArgs {
    /// JSON or MATPOWER (`.m`) case; a radial feeder is generated otherwise.
    #[arg(long)]
    case: Option<PathBuf>,
    #[arg(long)]
    buses: Option<usize>,
    #[arg(long)]
    network_seed: Option<u64>,
    #[arg(long)]
    load_scale: Option<f64>,
    #[arg(long)]
    load_factor: Option<f64>,
}

#[derive(Args)]
struct ScreeArgs {
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[command(flatten)]
    network: NetworkArgs,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ToyArgs {
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long)]
    n2: Option<usize>,
    #[arg(long)]
    rank: Option<usize>,
    /// Constraints per mix (default dim T).
    #[arg(long)]
    count: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    mixes: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    target_success: Option<f64>,
    #[arg(long)]
    instance_seed: Option<u64>,
    #[arg(long)]
    constraint_seed: Option<u64>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<SearchMode>,
    #[arg(long)]
    start: Option<usize>,
    #[arg(long, value_parser = parse_method)]
    method: Option<Method>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    trials_output: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    network: NetworkArgs,
    #[arg(long, value_delimiter = ',')]
    fractions: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    /// Bus ids carrying a PMU.
    #[arg(long, value_delimiter = ',')]
    pmu: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', value_parser = parse_grid_method)]
    methods: Option<Vec<GridMethod>>,
    /// Leave the off-block zeros of the state matrix free.
    #[arg(long)]
    no_structural_zeros: bool,
    #[arg(long)]
    mag_threshold: Option<f64>,
    #[arg(long)]
    angle_threshold: Option<f64>,
    /// Per-trial results CSV.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    cdf: Option<PathBuf>,
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Runs the constraint-deletion probe and writes its CSV here.
    #[arg(long)]
    probe: Option<PathBuf>,
}

#[derive(Args)]
struct PowerflowArgs {
    #[command(flatten)]
    network: NetworkArgs,
    /// Bus voltages CSV.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// State matrix CSV.
    #[arg(long)]
    state: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct GenNetworkArgs {
    #[command(flatten)]
    network: NetworkArgs,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<SearchMode, String> {
    serde_json::from_value(serde_json::Value::String(s.into()))
        .map_err(|_| format!("expected unit-step or galloping, got {s:?}"))
}

fn parse_method(s: &str) -> Result<Method, String> {
    serde_json::from_value(serde_json::Value::String(s.into()))
        .map_err(|_| format!("expected nuclear or least-squares, got {s:?}"))
}

fn parse_grid_method(s: &str) -> Result<GridMethod, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| {
        let tags: Vec<_> = GridMethod::ALL.iter().map(|m| m.tag()).collect();
        format!("expected one of {}, got {s:?}", tags.join(", "))
    })
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

impl NetworkArgs {
    fn apply(self, cfg: &mut RunConfig) {
        let n = &mut cfg.network;
        set_opt(&mut n.case, self.case);
        set(&mut n.n_buses, self.buses);
        set(&mut n.seed, self.network_seed);
        set(&mut n.load_scale, self.load_scale);
        set(&mut n.load_factor, self.load_factor);
    }
}

#[derive(Debug, Clone, Copy)]
enum Task {
    Solve,
    LeastSquares,
    Coherence,
    Scree,
    Toy,
    Grid,
    Powerflow,
    GenNetwork,
}

fn apply_solve(a: SolveArgs, cfg: &mut RunConfig) {
    let s = &mut cfg.solve;
    set_opt(&mut s.matrix, a.matrix);
    set_opt(&mut s.observations, a.observations);
    set_opt(&mut s.n1, a.n1);
    set_opt(&mut s.n2, a.n2);
    set_opt(&mut s.constraints, a.constraints);
    set_opt(&mut s.truth, a.truth);
    set_opt(&mut s.output, a.output);
    set_opt(&mut s.report, a.report);
}

/// Defaults, then the config file, then `GRIDFILL_SEED`, then flags.
fn resolve(cli: Cli) -> Result<(RunConfig, Task)> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    cfg.apply_env()?;
    set(&mut cfg.seed, cli.seed);
    set_opt(&mut cfg.jobs, cli.jobs);
    cfg.strict |= cli.strict;
    let s = &mut cfg.solver;
    set(&mut s.rho, cli.solver.rho);
    set(&mut s.max_iterations, cli.solver.max_iterations);
    if let Some(t) = cli.solver.tolerance {
        s.primal_tolerance = t;
        s.dual_tolerance = t;
    }
    set(&mut s.exactness_tolerance, cli.solver.exactness_tolerance);

    let task = match cli.command {
        Command::Solve(a) => {
            apply_solve(a, &mut cfg);
            Task::Solve
        }
        Command::LeastSquares(a) => {
            apply_solve(a, &mut cfg);
            Task::LeastSquares
        }
        Command::Coherence(a) => {
            let c = &mut cfg.coherence;
            set_opt(&mut c.matrix, a.matrix);
            set_opt(&mut c.constraints, a.constraints);
            set_opt(&mut c.rank, a.rank);
            set_opt(&mut c.output, a.output);
            Task::Coherence
        }
        Command::Scree(a) => {
            set_opt(&mut cfg.scree.matrix, a.matrix);
            set_opt(&mut cfg.scree.output, a.output);
            a.network.apply(&mut cfg);
            Task::Scree
        }
        Command::Toy(a) => {
            let t = &mut cfg.toy;
            set(&mut t.n1, a.n1);
            set(&mut t.n2, a.n2);
            set(&mut t.r, a.rank);
            set_opt(&mut t.count, a.count);
            set(&mut t.mixes, a.mixes);
            set(&mut t.trials, a.trials);
            set(&mut t.target_success, a.target_success);
            set(&mut t.instance_seed, a.instance_seed);
            set(&mut t.constraint_seed, a.constraint_seed);
            set(&mut t.mode, a.mode);
            set_opt(&mut t.start, a.start);
            set(&mut t.method, a.method);
            set_opt(&mut t.output, a.output);
            set_opt(&mut t.trials_output, a.trials_output);
            Task::Toy
        }
        Command::Grid(a) => {
            a.network.apply(&mut cfg);
            let g = &mut cfg.grid;
            set(&mut g.fractions, a.fractions);
            set(&mut g.trials, a.trials);
            set(&mut g.pmu_buses, a.pmu);
            set(&mut g.methods, a.methods);
            if a.no_structural_zeros {
                g.structural_zeros = false;
            }
            set(&mut g.mag_threshold, a.mag_threshold);
            set(&mut g.angle_threshold, a.angle_threshold);
            set_opt(&mut g.output, a.output);
            set_opt(&mut g.cdf, a.cdf);
            set_opt(&mut g.summary, a.summary);
            set_opt(&mut g.probe_output, a.probe);
            Task::Grid
        }
        Command::Powerflow(a) => {
            a.network.apply(&mut cfg);
            let p = &mut cfg.powerflow;
            set_opt(&mut p.output, a.output);
            set_opt(&mut p.state, a.state);
            set_opt(&mut p.report, a.report);
            Task::Powerflow
        }
        Command::GenNetwork(a) => {
            a.network.apply(&mut cfg);
            set_opt(&mut cfg.network.output, a.output);
            Task::GenNetwork
        }
    };
    Ok((cfg, task))
}

fn run(cli: Cli) -> Result<()> {
    let (cfg, task) = resolve(cli)?;
    cfg.validate_common()?;
    if let Some(jobs) = cfg.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    match task {
        Task::Solve => commands::solve(&cfg, false),
        Task::LeastSquares => commands::solve(&cfg, true),
        Task::Coherence => commands::coherence(&cfg),
        Task::Scree => commands::scree_cmd(&cfg),
        Task::Toy => commands::toy(&cfg),
        Task::Grid => commands::grid(&cfg),
        Task::Powerflow => commands::powerflow(&cfg),
        Task::GenNetwork => commands::gen_network(&cfg),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<commands::NotConverged>().is_some() {
        return 4;
    }
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Parse(_)
                | Error::Io(_)
                | Error::InvalidInput(_)
                | Error::InvalidRank { .. }
                | Error::DimensionMismatch(_)
                | Error::Topology(_) => 2,
                Error::Infeasible(_) | Error::InconsistentObservation { .. } => 3,
                Error::UndefinedMetric(_) => 5,
                Error::NoSolution { .. } | Error::StaleSolution => 6,
                _ => 1,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
