use super::stages::{PredictionRow, Split, SubjectRow, TrajectoryFit};
use crate::dataio::Exclusion;
use crate::evalstats::{
    c_index, mean_sd, picp_mpiw, regression_metrics, td_auc, tertile_stratify, MetricReport,
};
use crate::harmonize::AtnProfile;
use crate::survnet::ici;
use crate::synthcohort::{oracle_metrics, OraclePrediction, SubjectTruth};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};

pub const PARAMETER_NAMES: [&str; 3] = ["intercept", "slope", "acceleration"];
pub const MARKER_NAMES: [&str; 3] = ["abeta42", "ptau", "ttau"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitCount {
    pub n: usize,
    pub events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub n_subjects: usize,
    pub n_events: usize,
    pub event_rate: f64,
    pub median_follow_up: f64,
    pub n_excluded: usize,
    pub exclusions: BTreeMap<String, usize>,
    pub splits: BTreeMap<String, SplitCount>,
    pub atn_profiles: BTreeMap<String, usize>,
    /// Imputed values per biomarker.
    pub imputed: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonizationSummary {
    pub marker: String,
    /// Variance across sites of the per-site mean log value, before site correction.
    pub site_mean_variance_before: f64,
    pub site_mean_variance_after: f64,
    pub reduction_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedSummary {
    pub fixed: [f64; 3],
    pub fixed_se: [f64; 3],
    pub random_effect_cov: [[f64; 3]; 3],
    pub residual_variance: f64,
    pub reliability_threshold: f64,
    pub n_reliable: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterMetrics {
    pub parameter: String,
    pub r2: f64,
    pub rmse: f64,
    pub pearson_r: f64,
    pub picp: f64,
    pub mpiw: f64,
    pub mean_aleatoric_variance: f64,
    pub mean_epistemic_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySection {
    /// Reliable test subjects scored.
    pub n_test: usize,
    pub mixed_model: MixedSummary,
    pub parameters: Vec<ParameterMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonValue {
    pub horizon: f64,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalModelMetrics {
    pub model: String,
    pub c_index: Option<f64>,
    pub td_auc: Vec<HorizonValue>,
    pub ici: Vec<HorizonValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TertileSummary {
    pub cuts: [f64; 2],
    /// Low, intermediate, high.
    pub sizes: [usize; 3],
    pub event_rates: [f64; 3],
    pub high_low_ratio: Option<f64>,
    pub logrank_chi_square: f64,
    pub logrank_p: f64,
    /// Low vs intermediate, intermediate vs high, low vs high.
    pub pairwise_p: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalSection {
    pub n_test: usize,
    pub n_events: usize,
    pub horizons: Vec<f64>,
    pub models: Vec<SurvivalModelMetrics>,
    pub tertiles: Option<TertileSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub c_index: Option<f64>,
    /// Difference from the linear Cox reference.
    pub delta_c_index: Option<f64>,
    pub relative_improvement_percent: Option<f64>,
}

/// Held-out evaluation of a pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub seed: u64,
    pub cohort: CohortSummary,
    pub harmonization: Vec<HarmonizationSummary>,
    pub trajectory: TrajectorySection,
    pub survival: SurvivalSection,
    pub comparison: Vec<ComparisonRow>,
    /// Scores against the generating truth (synthetic cohorts only).
    pub oracle: Vec<MetricReport>,
}

/// Variance across sites of per-site means (sites weighted equally).
pub fn site_mean_variance(values: &[f64], sites: &[String]) -> f64 {
    let mut acc: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for (v, s) in values.iter().zip(sites) {
        let e = acc.entry(s.as_str()).or_default();
        e.0 += v;
        e.1 += 1;
    }
    let means: Vec<f64> = acc.values().map(|(s, n)| s / *n as f64).collect();
    if means.len() < 2 {
        return 0.0;
    }
    mean_sd(&means).1.powi(2)
}

fn harmonization_summary(rows: &[SubjectRow]) -> Vec<HarmonizationSummary> {
    (0..3)
        .map(|k| {
            let observed: Vec<&SubjectRow> = rows.iter().filter(|r| !r.imputed[k]).collect();
            let sites: Vec<String> = observed.iter().map(|r| r.center.clone()).collect();
            let before: Vec<f64> = observed
                .iter()
                .map(|r| r.assay_scaled[k].unwrap_or(f64::NAN).ln())
                .collect();
            let after: Vec<f64> = observed.iter().map(|r| r.harmonized[k].ln()).collect();
            let vb = site_mean_variance(&before, &sites);
            let va = site_mean_variance(&after, &sites);
            HarmonizationSummary {
                marker: MARKER_NAMES[k].to_string(),
                site_mean_variance_before: vb,
                site_mean_variance_after: va,
                reduction_percent: if vb > 0.0 {
                    100.0 * (1.0 - va / vb)
                } else {
                    0.0
                },
            }
        })
        .collect()
}

fn cohort_summary(rows: &[SubjectRow], exclusions: &[Exclusion]) -> CohortSummary {
    let n = rows.len();
    let n_events = rows.iter().filter(|r| r.event).count();
    let mut follow: Vec<f64> = rows.iter().map(|r| r.time).collect();
    follow.sort_by(f64::total_cmp);
    let mut excl = BTreeMap::new();
    for e in exclusions {
        *excl.entry(e.reason.as_str().to_string()).or_insert(0) += 1;
    }
    let mut splits = BTreeMap::new();
    for s in [Split::Train, Split::Val, Split::Test] {
        let sub: Vec<&SubjectRow> = rows.iter().filter(|r| r.split == s).collect();
        splits.insert(
            s.as_str().to_string(),
            SplitCount {
                n: sub.len(),
                events: sub.iter().filter(|r| r.event).count(),
            },
        );
    }
    let mut atn: BTreeMap<String, usize> =
        AtnProfile::all().iter().map(|p| (p.label(), 0)).collect();
    for r in rows {
        *atn.entry(r.atn.clone()).or_insert(0) += 1;
    }
    let imputed = (0..3)
        .map(|k| {
            (
                MARKER_NAMES[k].to_string(),
                rows.iter().filter(|r| r.imputed[k]).count(),
            )
        })
        .collect();
    CohortSummary {
        n_subjects: n,
        n_events,
        event_rate: if n > 0 {
            n_events as f64 / n as f64
        } else {
            0.0
        },
        median_follow_up: if n > 0 {
            crate::evalstats::quantile(&follow, 0.5)
        } else {
            0.0
        },
        n_excluded: exclusions.len(),
        exclusions: excl,
        splits,
        atn_profiles: atn,
        imputed,
    }
}

fn survival_model_metrics(
    name: &str,
    scores: &[f64],
    probs: &[Vec<f64>],
    times: &[f64],
    events: &[bool],
    horizons: &[f64],
) -> SurvivalModelMetrics {
    SurvivalModelMetrics {
        model: name.to_string(),
        c_index: c_index(scores, times, events).ok(),
        td_auc: horizons
            .iter()
            .map(|&h| HorizonValue {
                horizon: h,
                value: td_auc(scores, times, events, h).ok(),
            })
            .collect(),
        ici: horizons
            .iter()
            .enumerate()
            .map(|(k, &h)| {
                let p: Vec<f64> = probs.iter().map(|v| v[k]).collect();
                HorizonValue {
                    horizon: h,
                    value: ici(&p, times, events, h).ok(),
                }
            })
            .collect(),
    }
}

/// Scores the held-out test split: trajectory accuracy and interval coverage
/// against the empirical-Bayes targets of reliable subjects, survival
/// discrimination and calibration for both models, risk tertiles, and, when
/// the generating truth is supplied, oracle metrics.
pub fn evaluate(
    seed: u64,
    rows: &[SubjectRow],
    exclusions: &[Exclusion],
    trajectories: &TrajectoryFit,
    predictions: &[PredictionRow],
    horizons: &[f64],
    truth: Option<&[SubjectTruth]>,
) -> Result<MetricsReport> {
    if predictions.len() != rows.len()
        || trajectories.rows.len() != rows.len()
        || rows
            .iter()
            .zip(predictions)
            .zip(&trajectories.rows)
            .any(|((r, p), t)| r.subject_id != p.subject_id || r.subject_id != t.subject_id)
    {
        return Err(Error::Input(
            "features, trajectories and predictions are not aligned".into(),
        ));
    }
    let test: Vec<usize> = (0..rows.len())
        .filter(|&i| rows[i].split == Split::Test)
        .collect();

    let reliable_test: Vec<usize> = test
        .iter()
        .copied()
        .filter(|&i| trajectories.rows[i].reliable)
        .collect();
    let mut parameters = Vec::new();
    if reliable_test.len() >= 2 {
        for (k, name) in PARAMETER_NAMES.iter().enumerate() {
            let pred: Vec<f64> = reliable_test
                .iter()
                .map(|&i| predictions[i].trajectory.means[k])
                .collect();
            let truth_k: Vec<f64> = reliable_test
                .iter()
                .map(|&i| trajectories.rows[i].coefficients[k])
                .collect();
            let lo: Vec<f64> = reliable_test
                .iter()
                .map(|&i| predictions[i].trajectory.lo[k])
                .collect();
            let hi: Vec<f64> = reliable_test
                .iter()
                .map(|&i| predictions[i].trajectory.hi[k])
                .collect();
            let reg = regression_metrics(&pred, &truth_k)?;
            let iv = picp_mpiw(&lo, &hi, &truth_k)?;
            let m = reliable_test.len() as f64;
            parameters.push(ParameterMetrics {
                parameter: name.to_string(),
                r2: reg.r2,
                rmse: reg.rmse,
                pearson_r: reg.pearson_r,
                picp: iv.picp,
                mpiw: iv.mpiw,
                mean_aleatoric_variance: reliable_test
                    .iter()
                    .map(|&i| predictions[i].trajectory.aleatoric[k])
                    .sum::<f64>()
                    / m,
                mean_epistemic_variance: reliable_test
                    .iter()
                    .map(|&i| predictions[i].trajectory.epistemic[k])
                    .sum::<f64>()
                    / m,
            });
        }
    }
    let mm = &trajectories.model;
    let trajectory = TrajectorySection {
        n_test: reliable_test.len(),
        mixed_model: MixedSummary {
            fixed: mm.fixed,
            fixed_se: mm.fixed_se,
            random_effect_cov: mm.sigma_u,
            residual_variance: mm.sigma2,
            reliability_threshold: trajectories.tau_var,
            n_reliable: trajectories.rows.iter().filter(|t| t.reliable).count(),
        },
        parameters,
    };

    let times: Vec<f64> = test.iter().map(|&i| rows[i].time).collect();
    let events: Vec<bool> = test.iter().map(|&i| rows[i].event).collect();
    let deep: Vec<f64> = test.iter().map(|&i| predictions[i].risk).collect();
    let linear: Vec<f64> = test.iter().map(|&i| predictions[i].linear_risk).collect();
    let deep_p: Vec<Vec<f64>> = test
        .iter()
        .map(|&i| predictions[i].event_probability.clone())
        .collect();
    let linear_p: Vec<Vec<f64>> = test
        .iter()
        .map(|&i| predictions[i].linear_event_probability.clone())
        .collect();
    let models = vec![
        survival_model_metrics("deep_survival", &deep, &deep_p, &times, &events, horizons),
        survival_model_metrics("linear_cox", &linear, &linear_p, &times, &events, horizons),
    ];
    let tertiles = tertile_stratify(&deep, &times, &events).ok().map(|t| {
        let ratio = t.high_low_ratio();
        TertileSummary {
            cuts: [t.cuts.0, t.cuts.1],
            sizes: t.sizes,
            event_rates: t.event_rates,
            high_low_ratio: ratio.is_finite().then_some(ratio),
            logrank_chi_square: t.overall.chi_square,
            logrank_p: t.overall.p_value,
            pairwise_p: t.pairwise_p,
        }
    });
    let reference = models[1].c_index;
    let comparison = models
        .iter()
        .map(|m| {
            let delta = m.c_index.zip(reference).map(|(c, r)| c - r);
            ComparisonRow {
                model: m.model.clone(),
                c_index: m.c_index,
                delta_c_index: delta,
                relative_improvement_percent: delta.zip(reference).map(|(d, r)| 100.0 * d / r),
            }
        })
        .collect();
    let survival = SurvivalSection {
        n_test: test.len(),
        n_events: events.iter().filter(|e| **e).count(),
        horizons: horizons.to_vec(),
        models,
        tertiles,
    };

    let oracle = match truth {
        Some(truth) => {
            let by_id: HashMap<&str, usize> = truth
                .iter()
                .enumerate()
                .map(|(i, t)| (t.subject_id.as_str(), i))
                .collect();
            let preds: Vec<OraclePrediction> = test
                .iter()
                .filter(|&&i| by_id.contains_key(rows[i].subject_id.as_str()))
                .map(|&i| OraclePrediction {
                    subject_id: rows[i].subject_id.clone(),
                    coefficients: Some(predictions[i].trajectory.means),
                    risk: Some(predictions[i].risk),
                })
                .collect();
            if preds.len() < test.len() {
                return Err(Error::Input(format!(
                    "ground truth is missing {} test subjects",
                    test.len() - preds.len()
                )));
            }
            oracle_metrics(truth, &preds)?
        }
        None => Vec::new(),
    };

    Ok(MetricsReport {
        seed,
        cohort: cohort_summary(rows, exclusions),
        harmonization: harmonization_summary(rows),
        trajectory,
        survival,
        comparison,
        oracle,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn site_mean_variance_matches_hand_computation() {
        let v = [1.0, 3.0, 10.0, 10.0, 4.0];
        let s: Vec<String> = ["a", "a", "b", "b", "c"]
            .iter()
            .map(|x| x.to_string())
            .collect();
        // Site means 2, 10, 4 → mean 16/3, sample variance.
        let m = 16.0 / 3.0;
        let expect =
            ((2.0 - m) * (2.0f64 - m) + (10.0 - m) * (10.0 - m) + (4.0 - m) * (4.0 - m)) / 2.0;
        assert!((site_mean_variance(&v, &s) - expect).abs() < 1e-12);
        assert_eq!(site_mean_variance(&[1.0], &s[..1]), 0.0);
    }
}
