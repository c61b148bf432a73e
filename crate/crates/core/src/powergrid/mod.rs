//! Radial distribution networks: cases, power flow, the block state matrix
//! and its linear constraints.

mod case;
mod constraints;
mod flow;
mod state;

pub use case::{
    generate_radial_case, load_case, parse_case_json, parse_matpower, Bus, CaseFile, Line,
    NetworkCase, Slack,
};
pub use constraints::{approx_constraints, filter_constraints, physics_constraints, prune_dependent};
pub use flow::{
    bus_injections, line_currents, power_mismatch, solve_power_flow, PowerFlowSolution,
    MAX_SWEEPS, MISMATCH_TOLERANCE, SWEEP_TOLERANCE,
};
pub use state::{
    assemble_state_matrix, col, residuals, StateLayout, StateMatrix, StateResiduals,
    BUS_COLUMNS, LINE_COLUMNS, STATE_COLUMNS,
};
