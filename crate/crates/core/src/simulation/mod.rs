//! Monte Carlo study of LS and MM fits under contamination.

pub mod config;
pub mod models;
pub mod study;

pub use config::{Contamination, ModelKind, ScenarioConfig, UpsilonChoice, CONTAMINATION_RATE};
pub use models::{
    generate, generate_with, stream_rng, truth_for, truth_model1, truth_model2, FlagMode, GeneratedSample, Stream,
    TruthSet,
};
pub use study::{
    metrics, run_study, sweep, trim_count, write_rows, EstimatorSummary, MetricSet, MetricsAccumulator, ScenarioEcho,
    StudyReport, StudyRow, SweepReport, SweepSpec,
};
