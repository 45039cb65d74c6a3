//! Experiment configs, the end-to-end pipeline and parameter sweeps.

mod config;
mod pipeline;

pub use config::{
    derive_seed, BasisSpec, ChainSpec, ExperimentConfig, InferenceMode, ModelSpec, ObservationSpec, ReductionSpec, SamplingSpec,
    TestSpec,
};
pub use pipeline::{
    build_instances, memory_deviation, results_csv, run_pipeline, sweep, thread_count, Experiment, Instance, ResultRow, RunOptions, RunOutcome,
    Status, TestData, RECOVERY_TOLERANCE, RESULTS_HEADER,
};
