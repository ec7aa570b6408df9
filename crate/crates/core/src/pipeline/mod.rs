//! End-to-end analysis pipeline: the run configuration, the per-stage
//! computations and the run-directory file layout shared by the command-line
//! front end and the acceptance tests. Every stage is a function of its input
//! files and the run configuration, so stages can be re-run independently.

mod config;
mod files;
mod report;
mod resample;
mod stages;

pub use config::{RunConfig, SPLIT_DEFAULT};
pub use files::{read_json, read_jsonl, write_json, write_jsonl, write_table, RunDir};
pub use report::{
    evaluate, site_mean_variance, CohortSummary, ComparisonRow, HarmonizationSummary, HorizonValue,
    MetricsReport, MixedSummary, ParameterMetrics, SurvivalModelMetrics, SurvivalSection,
    TertileSummary, TrajectorySection,
};
pub use resample::{
    cv_compare, fairness_report, loco_report, CvCompareReport, CvTestRow, DeepHoldout, FairnessRun,
};
pub use stages::{
    assign_splits, fit_trajectories, harmonize_records, marker_input, predict, train_survival,
    train_trajectory, trajectory_data, LinearCoxModel, PredictionRow, Split, SubjectRow,
    SurvivalModels, TrajectoryFit, TrajectoryRow,
};
