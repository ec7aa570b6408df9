//! Evaluation metrics, resampling harnesses and hypothesis tests.

mod concordance;
mod cv;
mod fairness;
mod hypothesis;
mod km;
mod loco;
mod regression;

pub use concordance::{binary_auc, c_index, td_auc};
pub use cv::{repeated_cv, stratified_folds, CvMethod, CvProtocol, CvResult, CvRow, MethodSummary};
pub use fairness::{fairness_strata, FairnessReport, FairnessSubject, StratumReport};
pub use hypothesis::{
    average_ranks, bootstrap_bca, p_adjust, permutation_test, wilcoxon_signed_rank, AdjustMethod,
    BootstrapResult, WilcoxonResult, WILCOXON_EXACT_MAX_N,
};
pub use km::{
    km_fit, logrank_test, quantile, tertile_stratify, KmCurve, LogRankResult, TertileReport,
};
pub use loco::{
    loco_harness, CenterReport, HoldoutModel, HoldoutPrediction, LocoReport, TrajectoryEval,
};
pub use regression::{picp_mpiw, regression_metrics, IntervalMetrics, RegressionMetrics};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("undefined metric: {0}")]
    Undefined(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("input length mismatch: {0:?}")]
    LengthMismatch(Vec<usize>),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub(crate) fn check_lengths(lens: &[usize]) -> Result<(), StatsError> {
    if lens.windows(2).all(|w| w[0] == w[1]) {
        Ok(())
    } else {
        Err(StatsError::LengthMismatch(lens.to_vec()))
    }
}

/// One named metric value with optional interval and stratum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    pub value: f64,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ci: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stratum: Option<String>,
}

impl MetricReport {
    pub fn new(metric: impl Into<String>, value: f64, n: usize) -> Self {
        Self {
            metric: metric.into(),
            value,
            n,
            ci: None,
            stratum: None,
        }
    }

    pub fn with_ci(mut self, lo: f64, hi: f64) -> Self {
        self.ci = Some((lo.min(self.value), hi.max(self.value)));
        self
    }

    pub fn in_stratum(mut self, stratum: impl Into<String>) -> Self {
        self.stratum = Some(stratum.into());
        self
    }
}

/// Mean and sample standard deviation, ignoring NaNs.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
