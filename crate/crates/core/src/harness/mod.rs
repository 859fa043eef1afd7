//! Seeded experiments: configuration, runs against the exact oracle,
//! aggregation across seeds and CSV output.

pub mod config;
pub mod output;
pub mod run;

pub use config::{apply_override, default_checkpoints, ExperimentConfig, PolicySpec};
pub use run::{
    aggregate, oracle, simulate, sublinearity_statistic, system_oracle, AggregateRow, Experiment, Oracle,
    RegretTrace, SweepResult, TracePoint,
};
