use super::{c_index, mean_sd, picp_mpiw, regression_metrics, td_auc};
use crate::numcore::derive_seed;
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Held-out intercept predictions for subjects with reliable trajectory targets.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEval {
    pub pred: Vec<f64>,
    pub truth: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct HoldoutPrediction {
    /// Risk score per test subject, in the order of the `test` slice.
    pub risk: Vec<f64>,
    pub trajectory: Option<TrajectoryEval>,
}

/// Model pipeline trained on one index set and evaluated on another.
pub trait HoldoutModel: Sync {
    fn fit_predict(&self, train: &[usize], test: &[usize], seed: u64) -> Result<HoldoutPrediction>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterReport {
    pub center: String,
    pub n: usize,
    pub events: usize,
    /// `None` when undefined (e.g. no events in the held-out center).
    pub c_index: Option<f64>,
    pub auc_3yr: Option<f64>,
    pub intercept_r2: Option<f64>,
    pub intercept_picp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStat {
    pub mean: f64,
    pub sd: f64,
    pub cv_percent: f64,
    pub min: f64,
    pub max: f64,
}

impl SummaryStat {
    fn from_values(v: &[f64]) -> Option<Self> {
        if v.is_empty() {
            return None;
        }
        let (mean, sd) = mean_sd(v);
        Some(Self {
            mean,
            sd,
            cv_percent: 100.0 * sd / mean,
            min: v.iter().cloned().fold(f64::INFINITY, f64::min),
            max: v.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocoReport {
    pub min_center_n: usize,
    pub centers: Vec<CenterReport>,
    /// Centers below the size threshold: kept in every training set, never held out.
    pub excluded_centers: Vec<String>,
    pub c_index: Option<SummaryStat>,
    pub auc_3yr: Option<SummaryStat>,
    pub intercept_r2: Option<SummaryStat>,
    pub intercept_picp: Option<SummaryStat>,
}

/// Leave-one-center-out evaluation over every center with at least
/// `min_center_n` subjects.
pub fn loco_harness(
    centers: &[String],
    times: &[f64],
    events: &[bool],
    min_center_n: usize,
    model: &dyn HoldoutModel,
    seed: u64,
) -> Result<LocoReport> {
    super::check_lengths(&[centers.len(), times.len(), events.len()])?;
    let mut by_center: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, c) in centers.iter().enumerate() {
        by_center.entry(c.as_str()).or_default().push(i);
    }
    let (qualifying, excluded): (Vec<_>, Vec<_>) = by_center
        .iter()
        .partition(|(_, idx)| idx.len() >= min_center_n);
    if qualifying.len() < 2 {
        return Err(Error::Stats(super::StatsError::InsufficientData(format!(
            "LOCO needs ≥2 centers with n ≥ {min_center_n}, found {}",
            qualifying.len()
        ))));
    }
    let reports: Vec<Result<CenterReport>> = qualifying
        .par_iter()
        .enumerate()
        .map(|(k, (center, test))| {
            let train: Vec<usize> = (0..centers.len())
                .filter(|i| centers[*i].as_str() != **center)
                .collect();
            let pred = model.fit_predict(&train, test, derive_seed(seed, k as u64))?;
            let t: Vec<f64> = test.iter().map(|&i| times[i]).collect();
            let e: Vec<bool> = test.iter().map(|&i| events[i]).collect();
            let n_events = e.iter().filter(|x| **x).count();
            let c = c_index(&pred.risk, &t, &e).ok();
            let auc = td_auc(&pred.risk, &t, &e, 3.0).ok();
            let (r2, picp) = match &pred.trajectory {
                Some(tr) if tr.truth.len() >= 2 => (
                    regression_metrics(&tr.pred, &tr.truth).ok().map(|m| m.r2),
                    picp_mpiw(&tr.lo, &tr.hi, &tr.truth).ok().map(|m| m.picp),
                ),
                _ => (None, None),
            };
            Ok(CenterReport {
                center: center.to_string(),
                n: test.len(),
                events: n_events,
                c_index: c,
                auc_3yr: auc,
                intercept_r2: r2,
                intercept_picp: picp,
            })
        })
        .collect();
    let centers_out = reports.into_iter().collect::<Result<Vec<_>>>()?;
    let collect = |f: fn(&CenterReport) -> Option<f64>| -> Option<SummaryStat> {
        SummaryStat::from_values(&centers_out.iter().filter_map(f).collect::<Vec<_>>())
    };
    Ok(LocoReport {
        min_center_n,
        c_index: collect(|c| c.c_index),
        auc_3yr: collect(|c| c.auc_3yr),
        intercept_r2: collect(|c| c.intercept_r2),
        intercept_picp: collect(|c| c.intercept_picp),
        excluded_centers: excluded.iter().map(|(c, _)| c.to_string()).collect(),
        centers: centers_out,
    })
}
