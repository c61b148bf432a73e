use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::powergrid::case::NetworkCase;
use crate::powergrid::flow::{bus_injections, line_currents, PowerFlowSolution};
use crate::solver::Entry;

/// Column positions of the block state matrix.
pub mod col {
    pub const P: usize = 0;
    pub const Q: usize = 1;
    pub const RE_V: usize = 2;
    pub const IM_V: usize = 3;
    pub const ABS_V: usize = 4;
    pub const RE_I: usize = 5;
    pub const IM_I: usize = 6;
    pub const ABS_I: usize = 7;
    pub const P_FROM: usize = 8;
    pub const Q_FROM: usize = 9;
    pub const P_TO: usize = 10;
    pub const Q_TO: usize = 11;
    pub const P_LOSS: usize = 12;
    pub const Q_LOSS: usize = 13;
    pub const LINE_RE_I: usize = 14;
    pub const LINE_IM_I: usize = 15;
    pub const LINE_ABS_I: usize = 16;
}

pub const BUS_COLUMNS: usize = 8;
pub const LINE_COLUMNS: usize = 9;
pub const STATE_COLUMNS: usize = BUS_COLUMNS + LINE_COLUMNS;

/// Row/column bookkeeping: bus `s` is row `s`, line `k` is row `n_b + k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StateLayout {
    pub n_buses: usize,
    pub n_lines: usize,
}

impl StateLayout {
    pub fn of(case: &NetworkCase) -> Self {
        StateLayout {
            n_buses: case.n_buses(),
            n_lines: case.n_lines(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_buses + self.n_lines, STATE_COLUMNS)
    }

    pub fn bus_row(&self, s: usize) -> usize {
        s
    }

    pub fn line_row(&self, k: usize) -> usize {
        self.n_buses + k
    }

    pub fn is_structural_zero(&self, i: usize, j: usize) -> bool {
        if i < self.n_buses {
            j >= BUS_COLUMNS
        } else {
            j < BUS_COLUMNS
        }
    }

    /// Off-block positions, row-major.
    pub fn structural_zeros(&self) -> Vec<Entry> {
        let (rows, cols) = self.shape();
        (0..rows)
            .flat_map(|i| (0..cols).map(move |j| (i, j)))
            .filter(|&(i, j)| self.is_structural_zero(i, j))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix {
    layout: StateLayout,
    values: Matrix,
}

impl StateMatrix {
    pub fn new(layout: StateLayout, values: Matrix) -> Result<Self> {
        if values.shape() != layout.shape() {
            return Err(Error::dims(format!(
                "state matrix is {:?}, layout expects {:?}",
                values.shape(),
                layout.shape()
            )));
        }
        Ok(StateMatrix { layout, values })
    }

    pub fn layout(&self) -> StateLayout {
        self.layout
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn into_values(self) -> Matrix {
        self.values
    }

    pub fn bus_voltage(&self, s: usize) -> Complex64 {
        let row = self.layout.bus_row(s);
        Complex64::new(self.values[(row, col::RE_V)], self.values[(row, col::IM_V)])
    }

    pub fn structural_zero_mask(&self) -> Vec<bool> {
        let (rows, cols) = self.layout.shape();
        (0..rows)
            .flat_map(|i| (0..cols).map(move |j| (i, j)))
            .map(|(i, j)| self.layout.is_structural_zero(i, j))
            .collect()
    }
}

/// Fills the block state matrix from a converged power flow.
pub fn assemble_state_matrix(case: &NetworkCase, solution: &PowerFlowSolution) -> Result<StateMatrix> {
    if !solution.converged {
        return Err(Error::StaleSolution);
    }
    if solution.voltages.len() != case.n_buses() {
        return Err(Error::dims(format!(
            "solution has {} voltages for {} buses",
            solution.voltages.len(),
            case.n_buses()
        )));
    }
    let layout = StateLayout::of(case);
    let (rows, cols) = layout.shape();
    let mut m = Matrix::zeros(rows, cols);
    let v = &solution.voltages;
    let currents = line_currents(case, v);
    let injections = bus_injections(case, &currents);

    for s in 0..case.n_buses() {
        let row = layout.bus_row(s);
        let power = v[s] * injections[s].conj();
        m[(row, col::P)] = power.re;
        m[(row, col::Q)] = power.im;
        m[(row, col::RE_V)] = v[s].re;
        m[(row, col::IM_V)] = v[s].im;
        m[(row, col::ABS_V)] = v[s].norm();
        m[(row, col::RE_I)] = injections[s].re;
        m[(row, col::IM_I)] = injections[s].im;
        m[(row, col::ABS_I)] = injections[s].norm();
    }
    for (k, line) in case.lines().iter().enumerate() {
        let row = layout.line_row(k);
        let i = currents[k];
        let from = v[line.from] * i.conj();
        let to = -v[line.to] * i.conj();
        let mag2 = i.norm_sqr();
        m[(row, col::P_FROM)] = from.re;
        m[(row, col::Q_FROM)] = from.im;
        m[(row, col::P_TO)] = to.re;
        m[(row, col::Q_TO)] = to.im;
        m[(row, col::P_LOSS)] = line.r * mag2;
        m[(row, col::Q_LOSS)] = line.x * mag2;
        m[(row, col::LINE_RE_I)] = i.re;
        m[(row, col::LINE_IM_I)] = i.im;
        m[(row, col::LINE_ABS_I)] = i.norm();
    }
    StateMatrix::new(layout, m)
}

/// Largest absolute residual of each equation family.
///
/// 1. line power balance `From + To − Loss`
/// 2. bus power balance against line flows, and against the case loads on
///    non-slack buses
/// 3. current law at each bus
/// 4. Ohm's law on each line
/// 5. `S = V conj(I)` at buses and line ends
/// 6. losses `R|I|²`, `X|I|²`
/// 7. magnitude columns against their complex parts
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StateResiduals {
    pub families: [f64; 7],
}

impl StateResiduals {
    pub fn max(&self) -> f64 {
        self.families.iter().copied().fold(0.0, f64::max)
    }
}

pub fn residuals(case: &NetworkCase, state: &StateMatrix) -> Result<StateResiduals> {
    if state.layout() != StateLayout::of(case) {
        return Err(Error::dims("state layout does not match the case"));
    }
    let layout = state.layout();
    let m = state.values();
    let mut f = [0.0f64; 7];
    let mut bump = |k: usize, v: f64| f[k] = f[k].max(v.abs());

    let bus = |s: usize, c: usize| m[(layout.bus_row(s), c)];
    let line = |k: usize, c: usize| m[(layout.line_row(k), c)];

    let mut flow_p = vec![0.0; case.n_buses()];
    let mut flow_q = vec![0.0; case.n_buses()];
    let mut net_re = vec![0.0; case.n_buses()];
    let mut net_im = vec![0.0; case.n_buses()];
    for (k, l) in case.lines().iter().enumerate() {
        flow_p[l.from] += line(k, col::P_FROM);
        flow_q[l.from] += line(k, col::Q_FROM);
        flow_p[l.to] += line(k, col::P_TO);
        flow_q[l.to] += line(k, col::Q_TO);
        net_re[l.from] += line(k, col::LINE_RE_I);
        net_im[l.from] += line(k, col::LINE_IM_I);
        net_re[l.to] -= line(k, col::LINE_RE_I);
        net_im[l.to] -= line(k, col::LINE_IM_I);

        bump(0, line(k, col::P_FROM) + line(k, col::P_TO) - line(k, col::P_LOSS));
        bump(0, line(k, col::Q_FROM) + line(k, col::Q_TO) - line(k, col::Q_LOSS));

        let (g, b) = (l.conductance(), l.susceptance());
        let d_re = bus(l.from, col::RE_V) - bus(l.to, col::RE_V);
        let d_im = bus(l.from, col::IM_V) - bus(l.to, col::IM_V);
        bump(3, g * d_re - b * d_im - line(k, col::LINE_RE_I));
        bump(3, b * d_re + g * d_im - line(k, col::LINE_IM_I));

        let i = Complex64::new(line(k, col::LINE_RE_I), line(k, col::LINE_IM_I));
        let vs = state.bus_voltage(l.from);
        let vt = state.bus_voltage(l.to);
        let from = Complex64::new(line(k, col::P_FROM), line(k, col::Q_FROM));
        let to = Complex64::new(line(k, col::P_TO), line(k, col::Q_TO));
        bump(4, (from - vs * i.conj()).norm());
        bump(4, (to + vt * i.conj()).norm());

        let abs_i = line(k, col::LINE_ABS_I);
        bump(5, line(k, col::P_LOSS) - l.r * abs_i * abs_i);
        bump(5, line(k, col::Q_LOSS) - l.x * abs_i * abs_i);
        bump(6, abs_i - i.norm());
    }
    for (s, b) in case.buses().iter().enumerate() {
        bump(1, bus(s, col::P) - flow_p[s]);
        bump(1, bus(s, col::Q) - flow_q[s]);
        if s > 0 {
            bump(1, bus(s, col::P) + b.p_load);
            bump(1, bus(s, col::Q) + b.q_load);
        }
        bump(2, bus(s, col::RE_I) - net_re[s]);
        bump(2, bus(s, col::IM_I) - net_im[s]);

        let i = Complex64::new(bus(s, col::RE_I), bus(s, col::IM_I));
        let power = Complex64::new(bus(s, col::P), bus(s, col::Q));
        bump(4, (power - state.bus_voltage(s) * i.conj()).norm());
        bump(6, bus(s, col::ABS_V) - state.bus_voltage(s).norm());
        bump(6, bus(s, col::ABS_I) - i.norm());
    }
    Ok(StateResiduals { families: f })
}
