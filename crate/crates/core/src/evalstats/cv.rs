use super::{c_index, mean_sd};
use crate::numcore::{derive_seed, rng_from_seed};
use crate::Result;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvProtocol {
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for CvProtocol {
    fn default() -> Self {
        Self {
            folds: 5,
            repeats: 5,
            seed: 0,
        }
    }
}

/// A survival method evaluated under cross-validation.
pub trait CvMethod: Sync {
    fn name(&self) -> String;
    /// Risk scores for `test`, after fitting on `train`.
    fn fit_predict(&self, train: &[usize], test: &[usize], seed: u64) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub method: String,
    pub repeat: usize,
    pub fold: usize,
    pub c_index: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub mean: f64,
    pub sd: f64,
    /// Coefficient of variation in percent.
    pub cv_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub rows: Vec<CvRow>,
    /// Fold index per subject, one vector per repeat.
    pub assignments: Vec<Vec<usize>>,
}

impl CvResult {
    /// C-index values of one method ordered by (repeat, fold).
    pub fn values(&self, method: &str) -> Vec<f64> {
        let mut rows: Vec<&CvRow> = self.rows.iter().filter(|r| r.method == method).collect();
        rows.sort_by_key(|r| (r.repeat, r.fold));
        rows.iter().map(|r| r.c_index).collect()
    }

    pub fn summaries(&self) -> Vec<MethodSummary> {
        let mut names: Vec<String> = Vec::new();
        for r in &self.rows {
            if !names.contains(&r.method) {
                names.push(r.method.clone());
            }
        }
        names
            .into_iter()
            .map(|m| {
                let (mean, sd) = mean_sd(&self.values(&m));
                MethodSummary {
                    method: m,
                    mean,
                    sd,
                    cv_percent: 100.0 * sd / mean,
                }
            })
            .collect()
    }
}

/// Event-stratified fold assignment: events and non-events are shuffled
/// separately and dealt round-robin, so each fold's event rate stays close to
/// the global rate.
pub fn stratified_folds(events: &[bool], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng_from_seed(seed);
    let mut pos: Vec<usize> = (0..events.len()).filter(|&i| events[i]).collect();
    let mut neg: Vec<usize> = (0..events.len()).filter(|&i| !events[i]).collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut assign = vec![0; events.len()];
    for (k, &i) in pos.iter().enumerate() {
        assign[i] = k % folds;
    }
    // continue the rotation so fold sizes stay balanced
    let offset = pos.len() % folds;
    for (k, &i) in neg.iter().enumerate() {
        assign[i] = (k + offset) % folds;
    }
    assign
}

/// Repeated stratified K-fold cross-validation. Every method sees the same
/// folds within a repeat, giving `folds × repeats` paired C-index values.
pub fn repeated_cv(
    times: &[f64],
    events: &[bool],
    protocol: CvProtocol,
    methods: &[&dyn CvMethod],
) -> Result<CvResult> {
    let mut assignments = Vec::with_capacity(protocol.repeats);
    for r in 0..protocol.repeats {
        let mut attempt = 0u64;
        loop {
            let seed = derive_seed(protocol.seed, (r as u64) << 16 | attempt);
            let assign = stratified_folds(events, protocol.folds, seed);
            let ok =
                (0..protocol.folds).all(|f| (0..events.len()).any(|i| assign[i] == f && events[i]));
            if ok || attempt >= 16 {
                if !ok {
                    log::warn!("repeat {r}: a fold has no events after {attempt} refolds");
                }
                assignments.push(assign);
                break;
            }
            log::info!("repeat {r}: fold without events, refolding");
            attempt += 1;
        }
    }

    let tasks: Vec<(usize, usize, usize)> = (0..protocol.repeats)
        .flat_map(|r| {
            (0..protocol.folds).flat_map(move |f| (0..methods.len()).map(move |m| (r, f, m)))
        })
        .collect();
    let rows: Vec<Result<CvRow>> = tasks
        .par_iter()
        .map(|&(r, f, m)| {
            let assign = &assignments[r];
            let train: Vec<usize> = (0..assign.len()).filter(|&i| assign[i] != f).collect();
            let test: Vec<usize> = (0..assign.len()).filter(|&i| assign[i] == f).collect();
            let seed = derive_seed(protocol.seed ^ 0xC0FFEE, (r * protocol.folds + f) as u64);
            let scores = methods[m].fit_predict(&train, &test, seed)?;
            let t: Vec<f64> = test.iter().map(|&i| times[i]).collect();
            let e: Vec<bool> = test.iter().map(|&i| events[i]).collect();
            Ok(CvRow {
                method: methods[m].name(),
                repeat: r,
                fold: f,
                c_index: c_index(&scores, &t, &e)?,
            })
        })
        .collect();
    Ok(CvResult {
        rows: rows.into_iter().collect::<Result<Vec<_>>>()?,
        assignments,
    })
}
