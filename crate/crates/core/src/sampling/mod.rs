//! Observation models, experiment harnesses and their metrics.

mod grid;
mod metrics;
mod observe;
mod search;
mod sweep;
mod toy;

pub use grid::{
    nu_probe, run_grid_experiment, GridConfig, GridInstance, GridMethod, ProbeConfig, ProbeRow,
    TrialResult,
};
pub use metrics::{
    empirical_cdf, median, rmse_voltage, threshold_probability, wrap_degrees, ThresholdFractions,
    VoltageRmse,
};
pub use observe::{
    bernoulli_entries, grid_sample, grid_unit_count, uniform_entries, uniform_permutation,
    ObservationSet, Provenance, SAMPLED_BUS_COLUMNS, SAMPLED_LINE_COLUMNS,
};
pub use search::{min_samples_search, recovers, Method, SearchConfig, SearchMode, SearchResult};
pub use sweep::{constraint_mix_sweep, MixRow, ToyConfig};
pub use toy::{generate_toy_instance, generate_tuned_constraints};
