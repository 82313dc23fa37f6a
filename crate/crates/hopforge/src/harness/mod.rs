//! Experiment orchestration: configuration files, distance sweeps, reward
//! traces, coverage reports, and deterministic CSV output.

mod config;
mod coverage;
mod sweep;
mod trace;

pub use config::{
    resolve_seed, ExperimentConfig, ExperimentSection, Scheme, SEED_ENV_VAR,
};
pub use coverage::{coverage_range, CoverageReport};
pub use sweep::{read_sweep_csv, run_distance_sweep, write_sweep_csv, SweepCell};
pub use trace::{run_reward_trace, write_trace_csv, TraceRow};
