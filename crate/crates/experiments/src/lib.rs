//! Experiment harness: Monte-Carlo validation of the error-reduction bound,
//! accuracy × k oracle sweeps, paired baseline comparisons, the noisy
//! rank-variance study and a synthetic benchmark dataset.
//!
//! All randomness derives from a master seed through named substreams, so any
//! sweep cell can be recomputed on its own and parallel runs match serial ones.

mod bound;
mod error;
pub mod output;
mod sweep;
mod synthetic;

pub use bound::{validate_bound, BoundRecord, MIN_BOUND_SAMPLES};
pub use error::{ExperimentError, Result};
pub use sweep::{
    comparison_sets, default_accuracies, delta_curve, fuse_cell, mean_beta, prepare_seed, run_baseline_delta,
    run_noise_sweep, run_oracle_sweep, run_refinement, run_sweep_cell, BaselineMethod, BaselineRecord, CellOutcome,
    NoiseRecord, NoiseSettings, RefinementRecord, SeedContext, SweepGrid, SweepRecord, VarianceNoise,
};
pub use synthetic::{make_synthetic_dataset, synthetic_target, BENCHMARK_DIM, BENCHMARK_NOISE_SD, BENCHMARK_ROWS};
