use super::config::{stream, RunConfig};
use crate::dataio::ParticipantRecord;
use crate::evalstats::quantile;
use crate::harmonize::{AssayMethod, Harmonizer, MarkerInput};
use crate::mixedfx::{reliability_filter, reml_fit, MixedModel, Series};
use crate::numcore::{derive_seed, rng_from_seed, Standardizer};
use crate::survnet::{linear_coxph_fit, EpochRecord, LinearCox, SurvData, SurvNetModel};
use crate::trajnet::{TrajData, TrajEpochRecord, TrajNetModel, TrajPrediction};
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// One harmonized subject: model features, outcome and stratification fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectRow {
    pub subject_id: String,
    pub center: String,
    pub split: Split,
    pub time: f64,
    pub event: bool,
    pub female: bool,
    pub age: f64,
    pub education: f64,
    pub atn: String,
    /// Assay-scaled values before site correction (pg/mL).
    pub assay_scaled: [Option<f64>; 3],
    /// Site-corrected, imputed values (pg/mL).
    pub harmonized: [f64; 3],
    pub imputed: [bool; 3],
    pub features: Vec<f64>,
}

/// Stratified random split: each event class is shuffled and cut at the
/// requested fractions, so every split keeps the overall event rate.
pub fn assign_splits(events: &[bool], fractions: [f64; 3], seed: u64) -> Vec<Split> {
    let mut out = vec![Split::Test; events.len()];
    let mut rng = rng_from_seed(seed);
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..events.len()).filter(|&i| events[i] == class).collect();
        idx.shuffle(&mut rng);
        let n = idx.len() as f64;
        let n_train = (fractions[0] * n).round() as usize;
        let n_val = ((fractions[1] * n).round() as usize).min(idx.len() - n_train.min(idx.len()));
        for (k, &i) in idx.iter().enumerate() {
            out[i] = if k < n_train {
                Split::Train
            } else if k < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
        }
    }
    out
}

/// Harmonization input for an integrated subject. A biomarker whose method
/// code is missing is treated as ELISA, the reference platform.
pub fn marker_input(record: &ParticipantRecord) -> MarkerInput {
    MarkerInput {
        subject_id: record.subject_id.clone(),
        site: record.center.clone(),
        raw: record.csf.values,
        methods: record.csf.methods.map(|m| m.unwrap_or(AssayMethod::Elisa)),
        abeta40: None,
        age: record.age,
        female: record.female,
        education: record.education,
        mmse: record.baseline_mmse,
        cdrsb: record.baseline_cdrsb,
        apoe4: None,
    }
}

/// Fits the harmonizer on every integrated subject (it uses no outcome
/// information), transforms them and assigns the data split.
pub fn harmonize_records(
    records: &[ParticipantRecord],
    cfg: &RunConfig,
) -> Result<(Harmonizer, Vec<SubjectRow>)> {
    if records.is_empty() {
        return Err(Error::Input("no integrated subjects to harmonize".into()));
    }
    let inputs: Vec<MarkerInput> = records.iter().map(marker_input).collect();
    let harmonizer = Harmonizer::fit(&inputs, cfg.harmonize.clone())?;
    let events: Vec<bool> = records.iter().map(|r| r.event).collect();
    let splits = assign_splits(&events, cfg.split, cfg.stage_seed(stream::SPLIT));
    let rows = records
        .iter()
        .zip(&inputs)
        .zip(splits)
        .enumerate()
        .map(|(i, ((r, input), split))| {
            let h = harmonizer.transform(input, i as u64)?;
            Ok(SubjectRow {
                subject_id: r.subject_id.clone(),
                center: r.center.clone(),
                split,
                time: r.event_time,
                event: r.event,
                female: r.female,
                age: r.age,
                education: r.education,
                atn: h.atn.label(),
                assay_scaled: h.assay_scaled,
                harmonized: h.harmonized,
                imputed: h.imputed,
                features: h.features,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((harmonizer, rows))
}

/// Empirical-Bayes CDR-SB trajectory of one subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub subject_id: String,
    pub split: Split,
    /// Intercept, slope and acceleration (fixed plus random effects).
    pub coefficients: [f64; 3],
    pub cond_var_trace: f64,
    pub n_visits: usize,
    pub reliable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFit {
    pub model: MixedModel,
    /// Reliability threshold on the conditional-variance trace.
    pub tau_var: f64,
    pub rows: Vec<TrajectoryRow>,
}

/// REML fit of the quadratic CDR-SB model on every subject, per-subject
/// empirical-Bayes estimates, and the reliability threshold taken as a
/// quantile of the training subjects' conditional-variance traces.
pub fn fit_trajectories(
    records: &[ParticipantRecord],
    rows: &[SubjectRow],
    cfg: &RunConfig,
) -> Result<TrajectoryFit> {
    if records.len() != rows.len()
        || records
            .iter()
            .zip(rows)
            .any(|(r, s)| r.subject_id != s.subject_id)
    {
        return Err(Error::Input(
            "integrated records and feature rows are not aligned".into(),
        ));
    }
    let series: Vec<Series> = records
        .iter()
        .map(|r| {
            Series::new(
                r.visits.iter().map(|v| v.t).collect(),
                r.visits.iter().map(|v| v.cdrsb).collect(),
            )
        })
        .collect();
    let model = reml_fit(&series, cfg.reml)?;
    let params: Vec<_> = series.par_iter().map(|s| model.eb_estimate(s)).collect();
    let mut train_traces: Vec<f64> = params
        .iter()
        .zip(rows)
        .filter(|(p, r)| r.split == Split::Train && p.n_visits >= cfg.min_visits)
        .map(|(p, _)| p.cond_var_trace)
        .collect();
    if train_traces.is_empty() {
        return Err(Error::Input(format!(
            "no training subject has ≥{} visits; cannot set the reliability threshold",
            cfg.min_visits
        )));
    }
    train_traces.sort_by(f64::total_cmp);
    let tau_var = quantile(&train_traces, cfg.reliability_quantile);
    let out = params
        .iter()
        .zip(rows)
        .map(|(p, r)| TrajectoryRow {
            subject_id: r.subject_id.clone(),
            split: r.split,
            coefficients: p.as_array(),
            cond_var_trace: p.cond_var_trace,
            n_visits: p.n_visits,
            reliable: reliability_filter(p, tau_var, cfg.min_visits),
        })
        .collect();
    Ok(TrajectoryFit {
        model,
        tau_var,
        rows: out,
    })
}

/// Features and trajectory targets of the reliable subjects among `idx`.
pub fn trajectory_data(
    rows: &[SubjectRow],
    traj: &[TrajectoryRow],
    idx: &[usize],
) -> (TrajData, Vec<usize>) {
    let kept: Vec<usize> = idx.iter().copied().filter(|&i| traj[i].reliable).collect();
    let data = TrajData {
        x: kept.iter().map(|&i| rows[i].features.clone()).collect(),
        targets: kept.iter().map(|&i| traj[i].coefficients).collect(),
    };
    (data, kept)
}

fn split_indices(rows: &[SubjectRow], split: Split) -> Vec<usize> {
    (0..rows.len())
        .filter(|&i| rows[i].split == split)
        .collect()
}

/// Trains the trajectory network on reliable training subjects with early
/// stopping on reliable validation subjects.
pub fn train_trajectory(
    rows: &[SubjectRow],
    traj: &[TrajectoryRow],
    cfg: &RunConfig,
) -> Result<(TrajNetModel, Vec<TrajEpochRecord>)> {
    let (train, _) = trajectory_data(rows, traj, &split_indices(rows, Split::Train));
    let (val, _) = trajectory_data(rows, traj, &split_indices(rows, Split::Val));
    let val = (!val.is_empty()).then_some(&val);
    Ok(TrajNetModel::fit(&train, val, cfg.trajectory.clone())?)
}

/// Linear Cox model on standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearCoxModel {
    pub scaler: Standardizer,
    pub cox: LinearCox,
}

impl LinearCoxModel {
    pub fn fit(data: &SurvData) -> Result<Self> {
        let scaler = Standardizer::fit(&data.x);
        let z: Vec<Vec<f64>> = data.x.iter().map(|r| scaler.transform(r)).collect();
        let cox = linear_coxph_fit(&z, &data.times, &data.events)?;
        Ok(Self { scaler, cox })
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        self.cox.score(&self.scaler.transform(x))
    }

    /// Probability of conversion by `horizon`.
    pub fn event_probability(&self, x: &[f64], horizon: f64) -> f64 {
        1.0 - self.cox.hazard.survival(self.score(x), horizon)
    }
}

pub struct SurvivalModels {
    pub deep: SurvNetModel,
    pub history: Vec<EpochRecord>,
    pub linear: LinearCoxModel,
}

pub(crate) fn surv_data(rows: &[SubjectRow], idx: &[usize]) -> SurvData {
    SurvData {
        x: idx.iter().map(|&i| rows[i].features.clone()).collect(),
        times: idx.iter().map(|&i| rows[i].time).collect(),
        events: idx.iter().map(|&i| rows[i].event).collect(),
    }
}

/// Trains the deep survival network (early stopping on the validation split)
/// and the linear Cox comparator on the training split.
pub fn train_survival(rows: &[SubjectRow], cfg: &RunConfig) -> Result<SurvivalModels> {
    let train = surv_data(rows, &split_indices(rows, Split::Train));
    let val = surv_data(rows, &split_indices(rows, Split::Val));
    let (deep, history) = SurvNetModel::fit(&train, Some(&val), cfg.survival.clone())?;
    let linear = LinearCoxModel::fit(&train)?;
    Ok(SurvivalModels {
        deep,
        history,
        linear,
    })
}

/// Model outputs for one subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub subject_id: String,
    pub split: Split,
    /// Deep-network log-risk.
    pub risk: f64,
    pub linear_risk: f64,
    /// Deep-network conversion probability at each configured horizon.
    pub event_probability: Vec<f64>,
    pub linear_event_probability: Vec<f64>,
    /// Median conversion-free time, when the survival curve reaches 0.5.
    pub median_survival: Option<f64>,
    pub trajectory: TrajPrediction,
}

/// Applies the fitted models to every subject. MC-dropout passes of subject
/// `i` are seeded from `(predict seed, i)`.
pub fn predict(
    rows: &[SubjectRow],
    deep: &SurvNetModel,
    linear: &LinearCoxModel,
    traj: &TrajNetModel,
    cfg: &RunConfig,
) -> Result<Vec<PredictionRow>> {
    let seed = cfg.stage_seed(stream::PREDICT);
    rows.par_iter()
        .enumerate()
        .map(|(i, r)| {
            let curve = deep.curve(&r.features)?;
            let lin = linear.score(&r.features);
            Ok(PredictionRow {
                subject_id: r.subject_id.clone(),
                split: r.split,
                risk: deep.risk(&r.features)?,
                linear_risk: lin,
                event_probability: cfg.horizons.iter().map(|h| 1.0 - curve.at(*h)).collect(),
                linear_event_probability: cfg
                    .horizons
                    .iter()
                    .map(|h| 1.0 - linear.cox.hazard.survival(lin, *h))
                    .collect(),
                median_survival: curve.median(),
                trajectory: traj.mc_predict(
                    &r.features,
                    cfg.trajectory.mc_samples,
                    derive_seed(seed, i as u64),
                )?,
            })
        })
        .collect()
}
