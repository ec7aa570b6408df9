use super::config::{stream, RunConfig};
use super::stages::{
    assign_splits, surv_data, trajectory_data, LinearCoxModel, Split, SubjectRow, TrajectoryRow,
};
use crate::evalstats::{
    bootstrap_bca, fairness_strata, loco_harness, p_adjust, permutation_test, repeated_cv,
    stratified_folds, wilcoxon_signed_rank, AdjustMethod, CvMethod, CvProtocol, CvRow,
    FairnessReport, FairnessSubject, HoldoutModel, HoldoutPrediction, LocoReport, MethodSummary,
    TrajectoryEval,
};
use crate::numcore::derive_seed;
use crate::survnet::SurvNetModel;
use crate::trajnet::TrajNetModel;
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Share of a resampling training set held back for early stopping.
const INNER_VALIDATION: f64 = 0.15;
/// Fewest paired fold-wise C-index values the bootstrap and permutation tests accept.
const MIN_PAIRED_FOLDS: usize = 5;

/// Splits `train` (stratified by event) into fitting and early-stopping parts.
fn inner_split(rows: &[SubjectRow], train: &[usize], seed: u64) -> (Vec<usize>, Vec<usize>) {
    let events: Vec<bool> = train.iter().map(|&i| rows[i].event).collect();
    let s = assign_splits(
        &events,
        [1.0 - INNER_VALIDATION, INNER_VALIDATION, 0.0],
        seed,
    );
    let (fit, stop): (Vec<_>, Vec<_>) = train
        .iter()
        .zip(&s)
        .partition(|(_, sp)| **sp == Split::Train);
    (
        fit.into_iter().map(|(i, _)| *i).collect(),
        stop.into_iter().map(|(i, _)| *i).collect(),
    )
}

/// The deep pipeline retrained on an arbitrary index set: the survival
/// network and, optionally, the trajectory network on reliable subjects.
pub struct DeepHoldout<'a> {
    pub rows: &'a [SubjectRow],
    pub trajectories: &'a [TrajectoryRow],
    pub config: &'a RunConfig,
    pub with_trajectory: bool,
}

impl DeepHoldout<'_> {
    fn fit_survival(&self, train: &[usize], seed: u64) -> Result<SurvNetModel> {
        let (fit, stop) = inner_split(self.rows, train, derive_seed(seed, 0));
        let mut cfg = self.config.survival.clone();
        cfg.seed = derive_seed(seed, 1);
        let (model, _) = SurvNetModel::fit(
            &surv_data(self.rows, &fit),
            Some(&surv_data(self.rows, &stop)),
            cfg,
        )?;
        Ok(model)
    }

    fn fit_trajectory(&self, train: &[usize], seed: u64) -> Result<TrajNetModel> {
        let (fit, stop) = inner_split(self.rows, train, derive_seed(seed, 2));
        let (fit, _) = trajectory_data(self.rows, self.trajectories, &fit);
        let (stop, _) = trajectory_data(self.rows, self.trajectories, &stop);
        let mut cfg = self.config.trajectory.clone();
        cfg.seed = derive_seed(seed, 3);
        let (model, _) = TrajNetModel::fit(&fit, (!stop.is_empty()).then_some(&stop), cfg)?;
        Ok(model)
    }
}

impl HoldoutModel for DeepHoldout<'_> {
    fn fit_predict(&self, train: &[usize], test: &[usize], seed: u64) -> Result<HoldoutPrediction> {
        let surv = self.fit_survival(train, seed)?;
        let risk = test
            .iter()
            .map(|&i| surv.risk(&self.rows[i].features))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let trajectory = if self.with_trajectory {
            let model = self.fit_trajectory(train, seed)?;
            let mut eval = TrajectoryEval::default();
            let (_, reliable) = trajectory_data(self.rows, self.trajectories, test);
            for &i in &reliable {
                let p = model.mc_predict(
                    &self.rows[i].features,
                    self.config.trajectory.mc_samples,
                    derive_seed(derive_seed(seed, 4), i as u64),
                )?;
                eval.pred.push(p.means[0]);
                eval.truth.push(self.trajectories[i].coefficients[0]);
                eval.lo.push(p.lo[0]);
                eval.hi.push(p.hi[0]);
            }
            Some(eval)
        } else {
            None
        };
        Ok(HoldoutPrediction { risk, trajectory })
    }
}

struct DeepCv<'a>(DeepHoldout<'a>);
struct LinearCv<'a>(&'a [SubjectRow]);

impl CvMethod for DeepCv<'_> {
    fn name(&self) -> String {
        "deep_survival".into()
    }
    fn fit_predict(&self, train: &[usize], test: &[usize], seed: u64) -> Result<Vec<f64>> {
        Ok(self.0.fit_predict(train, test, seed)?.risk)
    }
}

impl CvMethod for LinearCv<'_> {
    fn name(&self) -> String {
        "linear_cox".into()
    }
    fn fit_predict(&self, train: &[usize], test: &[usize], _seed: u64) -> Result<Vec<f64>> {
        let model = LinearCoxModel::fit(&surv_data(self.0, train))?;
        Ok(test
            .iter()
            .map(|&i| model.score(&self.0[i].features))
            .collect())
    }
}

/// One significance test of the paired fold-wise C-index differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvTestRow {
    pub comparison: String,
    pub test: String,
    pub mean_difference: f64,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub p_value: f64,
    pub p_holm: f64,
    pub p_bh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCompareReport {
    pub folds: usize,
    pub repeats: usize,
    pub summaries: Vec<MethodSummary>,
    pub rows: Vec<CvRow>,
    pub tests: Vec<CvTestRow>,
}

/// Repeated stratified cross-validation of the deep survival network against
/// the linear Cox model on every subject, with paired Wilcoxon, BCa bootstrap
/// and sign-flip permutation tests adjusted by Holm and Benjamini–Hochberg.
pub fn cv_compare(
    rows: &[SubjectRow],
    trajectories: &[TrajectoryRow],
    cfg: &RunConfig,
) -> Result<CvCompareReport> {
    if cfg.folds * cfg.repeats < MIN_PAIRED_FOLDS {
        return Err(Error::Config(format!(
            "significance tests need folds × repeats ≥ {MIN_PAIRED_FOLDS}, got {} × {}",
            cfg.folds, cfg.repeats
        )));
    }
    let times: Vec<f64> = rows.iter().map(|r| r.time).collect();
    let events: Vec<bool> = rows.iter().map(|r| r.event).collect();
    let deep = DeepCv(DeepHoldout {
        rows,
        trajectories,
        config: cfg,
        with_trajectory: false,
    });
    let linear = LinearCv(rows);
    let protocol = CvProtocol {
        folds: cfg.folds,
        repeats: cfg.repeats,
        seed: cfg.stage_seed(stream::CV),
    };
    let result = repeated_cv(&times, &events, protocol, &[&deep, &linear])?;
    let a = result.values(&deep.name());
    let b = result.values(&linear.name());
    let diffs: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let mean_diff = diffs.iter().sum::<f64>() / diffs.len().max(1) as f64;
    let wil = wilcoxon_signed_rank(&a, &b)?;
    let boot = bootstrap_bca(
        &diffs,
        cfg.bootstrap_resamples,
        0.95,
        cfg.stage_seed(stream::BOOTSTRAP),
    )?;
    let perm = permutation_test(
        &a,
        &b,
        cfg.permutations,
        cfg.stage_seed(stream::PERMUTATION),
    )?;
    let raw = [wil.p_value, boot.p_value, perm];
    let holm = p_adjust(&raw, AdjustMethod::Holm);
    let bh = p_adjust(&raw, AdjustMethod::Bh);
    let comparison = format!("{} vs {}", deep.name(), linear.name());
    let names = ["wilcoxon_signed_rank", "bootstrap_bca", "permutation"];
    let tests = (0..3)
        .map(|k| CvTestRow {
            comparison: comparison.clone(),
            test: names[k].to_string(),
            mean_difference: mean_diff,
            ci_lo: (k == 1).then_some(boot.lo),
            ci_hi: (k == 1).then_some(boot.hi),
            p_value: raw[k],
            p_holm: holm[k],
            p_bh: bh[k],
        })
        .collect();
    Ok(CvCompareReport {
        folds: cfg.folds,
        repeats: cfg.repeats,
        summaries: result.summaries(),
        rows: result.rows,
        tests,
    })
}

/// Leave-one-center-out evaluation of the full deep pipeline.
pub fn loco_report(
    rows: &[SubjectRow],
    trajectories: &[TrajectoryRow],
    cfg: &RunConfig,
) -> Result<LocoReport> {
    let centers: Vec<String> = rows.iter().map(|r| r.center.clone()).collect();
    let times: Vec<f64> = rows.iter().map(|r| r.time).collect();
    let events: Vec<bool> = rows.iter().map(|r| r.event).collect();
    let model = DeepHoldout {
        rows,
        trajectories,
        config: cfg,
        with_trajectory: true,
    };
    loco_harness(
        &centers,
        &times,
        &events,
        cfg.min_center_n,
        &model,
        cfg.stage_seed(stream::LOCO),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessRun {
    pub folds: usize,
    pub report: FairnessReport,
}

/// Subgroup performance from out-of-fold predictions: every subject is scored
/// by models that never saw it, so strata are evaluated on the full cohort.
pub fn fairness_report(
    rows: &[SubjectRow],
    trajectories: &[TrajectoryRow],
    cfg: &RunConfig,
) -> Result<FairnessRun> {
    let events: Vec<bool> = rows.iter().map(|r| r.event).collect();
    let seed = cfg.stage_seed(stream::FAIRNESS);
    let assign = stratified_folds(&events, cfg.folds, seed);
    let model = DeepHoldout {
        rows,
        trajectories,
        config: cfg,
        with_trajectory: true,
    };
    let per_fold: Vec<(Vec<usize>, HoldoutPrediction)> = (0..cfg.folds)
        .into_par_iter()
        .map(|f| {
            let test: Vec<usize> = (0..rows.len()).filter(|&i| assign[i] == f).collect();
            let train: Vec<usize> = (0..rows.len()).filter(|&i| assign[i] != f).collect();
            let pred = model.fit_predict(&train, &test, derive_seed(seed, f as u64))?;
            Ok((test, pred))
        })
        .collect::<Result<_>>()?;
    let mut risk = vec![f64::NAN; rows.len()];
    let mut intercept: Vec<Option<(f64, f64, f64, f64)>> = vec![None; rows.len()];
    for (test, pred) in &per_fold {
        for (k, &i) in test.iter().enumerate() {
            risk[i] = pred.risk[k];
        }
        if let Some(tr) = &pred.trajectory {
            let (_, reliable) = trajectory_data(rows, trajectories, test);
            for (k, &i) in reliable.iter().enumerate() {
                intercept[i] = Some((tr.pred[k], tr.truth[k], tr.lo[k], tr.hi[k]));
            }
        }
    }
    if risk.iter().any(|r| r.is_nan()) {
        return Err(Error::Input(
            "fold assignment left subjects unscored".into(),
        ));
    }
    let subjects: Vec<FairnessSubject> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| FairnessSubject {
            female: r.female,
            age: r.age,
            education: r.education,
            time: r.time,
            event: r.event,
            risk: risk[i],
            intercept: intercept[i],
        })
        .collect();
    Ok(FairnessRun {
        folds: cfg.folds,
        report: fairness_strata(&subjects),
    })
}
