use super::SubjectTruth;
use crate::evalstats::{c_index, regression_metrics, MetricReport, StatsError};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// A model's outputs for one subject, to be scored against the truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OraclePrediction {
    pub subject_id: String,
    /// Predicted intercept, slope and acceleration.
    pub coefficients: Option<[f64; 3]>,
    pub risk: Option<f64>,
}

/// Scores predictions against the generating truth rather than estimates:
/// R² per trajectory coefficient, concordance with the true log-risk, with
/// the uncensored conversion times and with the observed outcomes.
pub fn oracle_metrics(
    truth: &[SubjectTruth],
    predictions: &[OraclePrediction],
) -> Result<Vec<MetricReport>, StatsError> {
    let by_id: HashMap<&str, &SubjectTruth> =
        truth.iter().map(|t| (t.subject_id.as_str(), t)).collect();
    let joined: Vec<(&OraclePrediction, &SubjectTruth)> = predictions
        .iter()
        .map(|p| {
            by_id
                .get(p.subject_id.as_str())
                .map(|t| (p, *t))
                .ok_or_else(|| {
                    StatsError::Invalid(format!("no ground truth for subject {}", p.subject_id))
                })
        })
        .collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    let with_coef: Vec<([f64; 3], [f64; 3])> = joined
        .iter()
        .filter_map(|(p, t)| p.coefficients.map(|c| (c, t.coefficients)))
        .collect();
    if !with_coef.is_empty() {
        for (k, name) in ["intercept", "slope", "acceleration"].iter().enumerate() {
            let pred: Vec<f64> = with_coef.iter().map(|(p, _)| p[k]).collect();
            let tru: Vec<f64> = with_coef.iter().map(|(_, t)| t[k]).collect();
            let m = regression_metrics(&pred, &tru)?;
            out.push(MetricReport::new(
                format!("oracle_r2_{name}"),
                m.r2,
                pred.len(),
            ));
            out.push(MetricReport::new(
                format!("oracle_rmse_{name}"),
                m.rmse,
                pred.len(),
            ));
        }
    }
    let with_risk: Vec<(f64, &SubjectTruth)> = joined
        .iter()
        .filter_map(|(p, t)| p.risk.map(|r| (r, *t)))
        .collect();
    if !with_risk.is_empty() {
        let n = with_risk.len();
        let scores: Vec<f64> = with_risk.iter().map(|(r, _)| *r).collect();
        // Ordering by true risk: a higher true risk plays the role of an earlier failure.
        let neg_risk: Vec<f64> = with_risk.iter().map(|(_, t)| -t.log_risk).collect();
        out.push(MetricReport::new(
            "oracle_c_index_true_risk",
            c_index(&scores, &neg_risk, &vec![true; n])?,
            n,
        ));
        let times: Vec<f64> = with_risk.iter().map(|(_, t)| t.event_time).collect();
        let finite: Vec<bool> = times.iter().map(|t| t.is_finite()).collect();
        out.push(MetricReport::new(
            "oracle_c_index_event_time",
            c_index(&scores, &times, &finite)?,
            n,
        ));
        let obs: Vec<f64> = with_risk.iter().map(|(_, t)| t.observed_time).collect();
        let ev: Vec<bool> = with_risk.iter().map(|(_, t)| t.event).collect();
        out.push(MetricReport::new(
            "oracle_c_index_observed",
            c_index(&scores, &obs, &ev)?,
            n,
        ));
    }
    Ok(out)
}
