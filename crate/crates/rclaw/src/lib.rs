//! Experiment runner for rough-path driven scalar conservation laws:
//! configuration, end-to-end pipeline plumbing, the benchmark experiments
//! and deterministic CSV/JSON reporting on top of `rclaw-core`.

pub mod config;
pub mod experiments;
pub mod pipeline;
pub mod report;

pub use config::{DriverSpec, ExperimentConfig, InitialData};
pub use experiments::{
    benchmark_b1, benchmark_b2, benchmark_b3, run_bound_audits, run_oracle_suite,
    run_rate_experiment, run_wong_zakai, Check, ExperimentResult, Table,
};
pub use pipeline::{prepare, run, run_level, Prepared, RunOutput};
