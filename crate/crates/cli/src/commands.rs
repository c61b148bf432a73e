use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Result};
use gridfill::linalg::Matrix;
use gridfill::powergrid::{
    assemble_state_matrix, generate_radial_case, load_case, parse_matpower, residuals,
    solve_power_flow, NetworkCase, StateMatrix,
};
use gridfill::sampling::{
    constraint_mix_sweep, empirical_cdf, median, nu_probe, run_grid_experiment,
    threshold_probability, GridConfig, SearchConfig, ToyConfig, TrialResult,
};
use gridfill::solver::{
    assemble_affine, exact_recovery, relative_error, solve_least_squares, solve_nuclear,
    SolverReport,
};
use gridfill::subspace::{coherence_report, scree, ConstraintSpaceQ, RankSelection};
use gridfill::Error;
use serde::Serialize;

use crate::config::{required, RunConfig};
use crate::io::{self, fmt_f64, fmt_opt};

/// Solver finished without meeting its tolerances while `--strict` was set.
#[derive(Debug)]
pub struct NotConverged(pub String);

impl std::fmt::Display for NotConverged {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "not converged: {}", self.0)
    }
}

impl std::error::Error for NotConverged {}

fn note(path: &Path) {
    eprintln!("wrote {}", path.display());
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    method: &'static str,
    n1: usize,
    n2: usize,
    observed: usize,
    constraints: usize,
    #[serde(flatten)]
    solver: &'a SolverReport,
    relative_error: Option<f64>,
    recovered: Option<bool>,
}

pub fn solve(cfg: &RunConfig, least_squares: bool) -> Result<()> {
    let s = &cfg.solve;
    let output = required(&s.output, "output path")?;
    let constraints = s.constraints.as_deref().map(io::read_constraints).transpose()?;
    let (shape, observed) = match (&s.matrix, &s.observations) {
        (Some(m), None) => {
            let m = io::read_matrix(m)?;
            (m.shape(), io::observed_entries(&m))
        }
        (None, Some(o)) => {
            let obs = io::read_observations(o)?;
            let shape = match (s.n1, s.n2, &constraints) {
                (Some(n1), Some(n2), _) => (n1, n2),
                (None, None, Some(c)) => (c.n1, c.n2),
                _ => bail!(Error::InvalidInput(
                    "observations need n1 and n2 or a constraints file".into()
                )),
            };
            (shape, obs)
        }
        (Some(_), Some(_)) => bail!(Error::InvalidInput(
            "give either a matrix or an observations file, not both".into()
        )),
        (None, None) => bail!(Error::InvalidInput("missing matrix or observations".into())),
    };
    let linear = match constraints {
        Some(c) if (c.n1, c.n2) != shape => bail!(Error::DimensionMismatch(format!(
            "constraints are {}x{}, observations {}x{}",
            c.n1, c.n2, shape.0, shape.1
        ))),
        Some(c) => c.constraints,
        None => Vec::new(),
    };
    let n_constraints = linear.len();
    let sys = assemble_affine(shape, &observed, linear)?;
    let report = if least_squares {
        solve_least_squares(&sys)?
    } else {
        solve_nuclear(&sys, &cfg.solver)?
    };

    let (relative, recovered) = match &s.truth {
        Some(p) => {
            let truth = io::read_matrix(p)?;
            let rel = relative_error(&report.solution, &truth)?;
            let ok = exact_recovery(&report.solution, &truth, cfg.solver.exactness_tolerance)?;
            (Some(rel), Some(ok))
        }
        None => (None, None),
    };

    let json = cfg.to_json();
    io::write(output, &io::matrix_csv(&report.solution, &io::provenance_header(&json)))?;
    note(output);
    if let Some(path) = &s.report {
        let out = SolveOutput {
            method: if least_squares { "least-squares" } else { "nuclear" },
            n1: shape.0,
            n2: shape.1,
            observed: sys.entries().len(),
            constraints: n_constraints,
            solver: &report,
            relative_error: relative,
            recovered,
        };
        io::write_report(path, &json, &out)?;
        note(path);
    }
    if cfg.strict && !report.converged {
        bail!(NotConverged(format!(
            "solver stopped after {} iterations (primal {:e}, dual {:e}, feasibility {:e})",
            report.iterations, report.primal_residual, report.dual_residual, report.feasibility_residual
        )));
    }
    Ok(())
}

pub fn coherence(cfg: &RunConfig) -> Result<()> {
    let c = &cfg.coherence;
    let output = required(&c.output, "output path")?;
    let m = io::read_matrix(required(&c.matrix, "matrix path")?)?;
    let (n1, n2) = m.shape();
    let q = match &c.constraints {
        Some(p) => {
            let file = io::read_constraints(p)?;
            if (file.n1, file.n2) != (n1, n2) {
                bail!(Error::DimensionMismatch(format!(
                    "constraints are {}x{}, matrix {n1}x{n2}",
                    file.n1, file.n2
                )));
            }
            Some(ConstraintSpaceQ::from_constraints(n1, n2, &file.constraints)?)
        }
        None => None,
    };
    let rank = c.rank.map(RankSelection::Fixed).unwrap_or_default();
    let report = coherence_report(&m, rank, q.as_ref())?;
    io::write_report(output, &cfg.to_json(), &report)?;
    note(output);
    Ok(())
}

pub fn load_network(cfg: &RunConfig) -> Result<NetworkCase> {
    let n = &cfg.network;
    let case = match &n.case {
        Some(p) if p.extension().is_some_and(|e| e == "m") => {
            let text = std::fs::read_to_string(p).map_err(Error::from)?;
            parse_matpower(&text)?
        }
        Some(p) => load_case(p)?,
        None => generate_radial_case(n.n_buses, n.seed, n.load_scale)?,
    };
    Ok(if n.load_factor == 1.0 {
        case
    } else {
        case.scaled_loads(n.load_factor)
    })
}

fn network_state(case: &NetworkCase) -> Result<StateMatrix> {
    let flow = solve_power_flow(case)?;
    Ok(assemble_state_matrix(case, &flow)?)
}

pub fn scree_cmd(cfg: &RunConfig) -> Result<()> {
    let output = required(&cfg.scree.output, "output path")?;
    let m: Matrix = match &cfg.scree.matrix {
        Some(p) => io::read_matrix(p)?,
        None => {
            cfg.validate_network()?;
            network_state(&load_network(cfg)?)?.into_values()
        }
    };
    let s = scree(&m)?;
    let sv = gridfill::linalg::singular_values(&m);
    let rows: Vec<Vec<String>> = (0..s.normalized.len())
        .map(|k| {
            vec![
                (k + 1).to_string(),
                fmt_f64(sv[k]),
                fmt_f64(s.normalized[k]),
                fmt_f64(s.cumulative[k]),
            ]
        })
        .collect();
    let header = io::provenance_header(&cfg.to_json());
    io::write(
        output,
        &io::table_csv(&header, &["k", "singular_value", "normalized", "cumulative"], &rows),
    )?;
    note(output);
    Ok(())
}

pub fn toy(cfg: &RunConfig) -> Result<()> {
    cfg.validate_toy()?;
    let t = &cfg.toy;
    let output = required(&t.output, "output path")?;
    let toy = ToyConfig {
        n1: t.n1,
        n2: t.n2,
        r: t.r,
        count: t.count,
        instance_seed: t.instance_seed,
        constraint_seed: t.constraint_seed,
        search: SearchConfig {
            target_success: t.target_success,
            trials: t.trials,
            base_seed: cfg.seed,
            mode: t.mode,
            start: t.start,
            method: t.method,
            solver: cfg.solver,
        },
    };
    let rows = constraint_mix_sweep(&toy, &t.mixes)?;
    let header = io::provenance_header(&cfg.to_json());
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt_opt(r.mix),
                fmt_f64(r.mu_q_perp),
                fmt_f64(r.nu_q_perp),
                r.constraint_dim.to_string(),
                r.min_samples.map_or("NA".into(), |m| m.to_string()),
                r.solves.to_string(),
            ]
        })
        .collect();
    io::write(
        output,
        &io::table_csv(
            &header,
            &["mix", "mu_q_perp", "nu_q_perp", "constraint_dim", "min_samples", "solves"],
            &table,
        ),
    )?;
    note(output);
    if let Some(path) = &t.trials_output {
        let mut table = Vec::new();
        for r in &rows {
            for (k, m) in r.per_trial.iter().enumerate() {
                table.push(vec![
                    fmt_opt(r.mix),
                    (cfg.seed + k as u64).to_string(),
                    m.map_or("NA".into(), |m| m.to_string()),
                ]);
            }
        }
        io::write(path, &io::table_csv(&header, &["mix", "seed", "min_samples"], &table))?;
        note(path);
    }
    Ok(())
}

fn trial_row(t: &TrialResult) -> Vec<String> {
    vec![
        t.seed.to_string(),
        fmt_f64(t.fraction),
        t.samples.to_string(),
        t.method.tag().to_string(),
        t.recovered.to_string(),
        fmt_f64(t.relative_error),
        fmt_opt(t.rmse.magnitude),
        fmt_opt(t.rmse.angle),
        t.converged.to_string(),
        t.iterations.to_string(),
        t.constraints.to_string(),
        t.dropped_approx.to_string(),
    ]
}

const TRIAL_COLUMNS: [&str; 12] = [
    "seed",
    "fraction",
    "samples",
    "method",
    "recovered",
    "relative_error",
    "mag_rmse",
    "angle_rmse",
    "converged",
    "iterations",
    "constraints",
    "dropped_approx",
];

pub fn grid(cfg: &RunConfig) -> Result<()> {
    cfg.validate_grid()?;
    let g = &cfg.grid;
    let output = required(&g.output, "output path")?;
    let case = load_network(cfg)?;
    let truth = network_state(&case)?;
    let pmu_buses = g
        .pmu_buses
        .iter()
        .map(|&id| {
            case.bus_index(id)
                .ok_or_else(|| Error::InvalidInput(format!("PMU bus {id} is not in the case")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let grid_cfg = GridConfig {
        fractions: g.fractions.clone(),
        trials: g.trials,
        base_seed: cfg.seed,
        pmu_buses,
        methods: g.methods.clone(),
        structural_zeros: g.structural_zeros,
        solver: cfg.solver,
    };
    let results = run_grid_experiment(&case, &truth, &grid_cfg)?;
    let header = io::provenance_header(&cfg.to_json());

    let rows: Vec<Vec<String>> = results.iter().map(trial_row).collect();
    io::write(output, &io::table_csv(&header, &TRIAL_COLUMNS, &rows))?;
    note(output);

    // (method, fraction) groups in first-seen order
    let mut groups: Vec<((usize, usize), Vec<&TrialResult>)> = Vec::new();
    let mut index: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for t in &results {
        let m = g.methods.iter().position(|&m| m == t.method).unwrap_or(0);
        let f = g.fractions.iter().position(|&f| f == t.fraction).unwrap_or(0);
        let slot = *index.entry((m, f)).or_insert_with(|| {
            groups.push(((m, f), Vec::new()));
            groups.len() - 1
        });
        groups[slot].1.push(t);
    }
    groups.sort_by_key(|(k, _)| *k);

    if let Some(path) = &g.cdf {
        let mut table = Vec::new();
        for ((m, f), trials) in &groups {
            let metrics: [(&str, Vec<Option<f64>>); 2] = [
                ("mag_rmse", trials.iter().map(|t| t.rmse.magnitude).collect()),
                ("angle_rmse", trials.iter().map(|t| t.rmse.angle).collect()),
            ];
            for (name, values) in metrics {
                for (value, p) in empirical_cdf(&values) {
                    table.push(vec![
                        g.methods[*m].tag().to_string(),
                        fmt_f64(g.fractions[*f]),
                        name.to_string(),
                        fmt_f64(value),
                        fmt_f64(p),
                    ]);
                }
            }
        }
        io::write(
            path,
            &io::table_csv(&header, &["method", "fraction", "metric", "value", "cdf"], &table),
        )?;
        note(path);
    }

    if let Some(path) = &g.summary {
        let mut table = Vec::new();
        for ((m, f), trials) in &groups {
            let rmse: Vec<_> = trials.iter().map(|t| t.rmse).collect();
            let p = threshold_probability(&rmse, g.mag_threshold, g.angle_threshold)?;
            let mags: Vec<_> = rmse.iter().map(|r| r.magnitude).collect();
            let angles: Vec<_> = rmse.iter().map(|r| r.angle).collect();
            let recovered = trials.iter().filter(|t| t.recovered).count() as f64 / trials.len() as f64;
            table.push(vec![
                g.methods[*m].tag().to_string(),
                fmt_f64(g.fractions[*f]),
                trials.len().to_string(),
                fmt_opt(median(&mags)),
                fmt_opt(median(&angles)),
                fmt_opt(p.magnitude),
                fmt_opt(p.angle),
                fmt_f64(recovered),
            ]);
        }
        io::write(
            path,
            &io::table_csv(
                &header,
                &[
                    "method",
                    "fraction",
                    "trials",
                    "median_mag_rmse",
                    "median_angle_rmse",
                    "p_mag_below",
                    "p_angle_below",
                    "recovered",
                ],
                &table,
            ),
        )?;
        note(path);
    }

    if let Some(path) = &g.probe_output {
        let probe = nu_probe(&case, &truth, &g.probe, &grid_cfg)?;
        let table: Vec<Vec<String>> = probe
            .iter()
            .map(|r| {
                vec![
                    r.seed.to_string(),
                    r.kept.to_string(),
                    fmt_f64(r.nu_q_perp),
                    r.recovered.to_string(),
                    fmt_f64(r.relative_error),
                    fmt_opt(r.mag_rmse),
                ]
            })
            .collect();
        io::write(
            path,
            &io::table_csv(
                &header,
                &["seed", "kept", "nu_q_perp", "recovered", "relative_error", "mag_rmse"],
                &table,
            ),
        )?;
        note(path);
    }

    let unconverged = results
        .iter()
        .filter(|t| t.method != gridfill::sampling::GridMethod::LeastSquares && !t.converged)
        .count();
    if unconverged > 0 {
        eprintln!("{unconverged} of {} solves did not converge", results.len());
        if cfg.strict {
            bail!(NotConverged(format!("{unconverged} solves did not converge")));
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct PowerflowOutput {
    n_buses: usize,
    n_lines: usize,
    iterations: usize,
    mismatch: f64,
    converged: bool,
    /// Worst residual of each family of state-matrix identities.
    state_residuals: [f64; 7],
}

pub fn powerflow(cfg: &RunConfig) -> Result<()> {
    cfg.validate_network()?;
    let p = &cfg.powerflow;
    let output = required(&p.output, "output path")?;
    let case = load_network(cfg)?;
    let flow = solve_power_flow(&case)?;
    let header = io::provenance_header(&cfg.to_json());
    let rows: Vec<Vec<String>> = flow
        .voltages
        .iter()
        .enumerate()
        .map(|(s, v)| {
            vec![
                case.bus_id(s).to_string(),
                fmt_f64(v.re),
                fmt_f64(v.im),
                fmt_f64(v.norm()),
                fmt_f64(v.arg().to_degrees()),
            ]
        })
        .collect();
    io::write(output, &io::table_csv(&header, &["bus", "re", "im", "magnitude", "angle_deg"], &rows))?;
    note(output);

    let state = assemble_state_matrix(&case, &flow)?;
    if let Some(path) = &p.state {
        io::write(path, &io::matrix_csv(state.values(), &header))?;
        note(path);
    }
    if let Some(path) = &p.report {
        let out = PowerflowOutput {
            n_buses: case.n_buses(),
            n_lines: case.n_lines(),
            iterations: flow.iterations,
            mismatch: flow.residual,
            converged: flow.converged,
            state_residuals: residuals(&case, &state)?.families,
        };
        io::write_report(path, &cfg.to_json(), &out)?;
        note(path);
    }
    Ok(())
}

pub fn gen_network(cfg: &RunConfig) -> Result<()> {
    cfg.validate_network()?;
    let output = required(&cfg.network.output, "output path")?;
    let case = load_network(cfg)?;
    io::write(output, &(serde_json::to_string_pretty(&case.to_file())? + "\n"))?;
    note(output);
    Ok(())
}
