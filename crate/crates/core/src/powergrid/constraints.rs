use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::powergrid::case::NetworkCase;
use crate::powergrid::state::{col, StateLayout};
use crate::solver::{independent_constraints, Entry, LinearConstraint};

/// Exact linear relations among the state variables, `4(n_b + n_l)` rows:
/// line power balance (P, Q), bus power balance (P, Q), current law (Re, Im)
/// and Ohm's law (Re, Im).
pub fn physics_constraints(case: &NetworkCase) -> Vec<LinearConstraint> {
    let layout = StateLayout::of(case);
    let mut out = Vec::with_capacity(4 * (case.n_buses() + case.n_lines()));

    for k in 0..case.n_lines() {
        let row = layout.line_row(k);
        for (from, to, loss) in [
            (col::P_FROM, col::P_TO, col::P_LOSS),
            (col::Q_FROM, col::Q_TO, col::Q_LOSS),
        ] {
            out.push(LinearConstraint::new(
                vec![(row, from, 1.0), (row, to, 1.0), (row, loss, -1.0)],
                0.0,
            ));
        }
    }

    let mut outgoing = vec![Vec::new(); case.n_buses()];
    let mut incoming = vec![Vec::new(); case.n_buses()];
    for (k, l) in case.lines().iter().enumerate() {
        outgoing[l.from].push(layout.line_row(k));
        incoming[l.to].push(layout.line_row(k));
    }
    for s in 0..case.n_buses() {
        let row = layout.bus_row(s);
        for (own, from, to) in [(col::P, col::P_FROM, col::P_TO), (col::Q, col::Q_FROM, col::Q_TO)] {
            let mut terms = vec![(row, own, 1.0)];
            terms.extend(outgoing[s].iter().map(|&r| (r, from, -1.0)));
            terms.extend(incoming[s].iter().map(|&r| (r, to, -1.0)));
            out.push(LinearConstraint::new(terms, 0.0));
        }
    }
    for s in 0..case.n_buses() {
        let row = layout.bus_row(s);
        for (own, line_col) in [(col::RE_I, col::LINE_RE_I), (col::IM_I, col::LINE_IM_I)] {
            let mut terms = vec![(row, own, 1.0)];
            terms.extend(outgoing[s].iter().map(|&r| (r, line_col, -1.0)));
            terms.extend(incoming[s].iter().map(|&r| (r, line_col, 1.0)));
            out.push(LinearConstraint::new(terms, 0.0));
        }
    }

    for (k, l) in case.lines().iter().enumerate() {
        let row = layout.line_row(k);
        let (g, b) = (l.conductance(), l.susceptance());
        let (s, t) = (layout.bus_row(l.from), layout.bus_row(l.to));
        out.push(LinearConstraint::new(
            vec![
                (s, col::RE_V, g),
                (t, col::RE_V, -g),
                (s, col::IM_V, -b),
                (t, col::IM_V, b),
                (row, col::LINE_RE_I, -1.0),
            ],
            0.0,
        ));
        out.push(LinearConstraint::new(
            vec![
                (s, col::RE_V, b),
                (t, col::RE_V, -b),
                (s, col::IM_V, g),
                (t, col::IM_V, -g),
                (row, col::LINE_IM_I, -1.0),
            ],
            0.0,
        ));
    }
    out
}

/// Linearized voltage drop per line, one row each:
/// `|V_t| − |V_s| + (R (P_from − P_to)/2 + X (Q_from − Q_to)/2) / |V_1| = 0`.
pub fn approx_constraints(case: &NetworkCase) -> Result<Vec<LinearConstraint>> {
    let v1 = case.slack_voltage().norm();
    if !(v1 > 0.0) {
        return Err(Error::input("slack voltage magnitude is zero"));
    }
    let layout = StateLayout::of(case);
    Ok(case
        .lines()
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let row = layout.line_row(k);
            let (cr, cx) = (l.r / (2.0 * v1), l.x / (2.0 * v1));
            LinearConstraint::new(
                vec![
                    (layout.bus_row(l.to), col::ABS_V, 1.0),
                    (layout.bus_row(l.from), col::ABS_V, -1.0),
                    (row, col::P_FROM, cr),
                    (row, col::P_TO, -cr),
                    (row, col::Q_FROM, cx),
                    (row, col::Q_TO, -cx),
                ],
                0.0,
            )
        })
        .collect())
}

/// Keeps the constraints that reference at least one unobserved entry and
/// returns them with the number dropped.
pub fn filter_constraints(
    constraints: &[LinearConstraint],
    observed: &[Entry],
) -> (Vec<LinearConstraint>, usize) {
    let seen: HashSet<Entry> = observed.iter().copied().collect();
    let kept: Vec<LinearConstraint> = constraints
        .iter()
        .filter(|c| c.entries().any(|e| !seen.contains(&e)))
        .cloned()
        .collect();
    let dropped = constraints.len() - kept.len();
    (kept, dropped)
}

/// Approximate rows that remain after filtering and are independent of the
/// exact rows, the pinned entries and each other. An approximate row that is
/// implied by the rest would either add nothing or contradict the exact data.
pub fn prune_dependent(
    shape: (usize, usize),
    pinned: &[Entry],
    exact: &[LinearConstraint],
    approx: &[LinearConstraint],
) -> (Vec<LinearConstraint>, usize) {
    let keep = independent_constraints(shape, pinned, exact, approx);
    let kept: Vec<LinearConstraint> = keep.iter().map(|&k| approx[k].clone()).collect();
    let dropped = approx.len() - kept.len();
    (kept, dropped)
}
