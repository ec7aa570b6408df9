use super::{AtnThresholds, Biomarker, HarmonizeError};
use crate::numcore::Rng;
use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

/// Biomarker triple `[Aβ42, p-tau, t-tau]` with possibly missing entries.
pub type Partial = [Option<f64>; 3];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImputationMode {
    /// Regression prediction only.
    #[default]
    Deterministic,
    /// Prediction plus a residual resampled from the fitting cases.
    Stochastic,
}

/// Regression scale of each marker: amyloid enters as its reciprocal so that
/// the tau relationship is linear.
fn to_reg(b: Biomarker, v: f64) -> f64 {
    match b {
        Biomarker::Abeta42 => 1.0 / v,
        _ => v,
    }
}

fn from_reg(b: Biomarker, v: f64) -> f64 {
    match b {
        Biomarker::Abeta42 => 1.0 / v,
        _ => v,
    }
}

fn flag(b: Biomarker, v: f64, thr: &AtnThresholds) -> bool {
    match b {
        Biomarker::Abeta42 => v < thr.abeta42,
        Biomarker::Ptau => v > thr.ptau,
        Biomarker::Ttau => v > thr.ttau,
    }
}

/// Fills missing markers by least-squares regression (with intercept) of
/// each missing marker on the observed ones. Coefficients are fitted on the
/// complete cases sharing the subject's observable ATN flags; when that group
/// is too small for a stable fit all complete cases are used. Predictions are
/// floored at half the smallest observed value of the marker.
pub fn impute_biomarkers(
    partial: &Partial,
    complete: &[[f64; 3]],
    thresholds: &AtnThresholds,
    mode: ImputationMode,
    rng: Option<&mut Rng>,
) -> Result<[f64; 3], HarmonizeError> {
    let observed: Vec<usize> = (0..3).filter(|&k| partial[k].is_some()).collect();
    if observed.is_empty() {
        return Err(HarmonizeError::Imputation(
            "all three biomarkers missing".into(),
        ));
    }
    if observed.len() == 3 {
        return Ok([
            partial[0].unwrap(),
            partial[1].unwrap(),
            partial[2].unwrap(),
        ]);
    }
    if complete.is_empty() {
        return Err(HarmonizeError::Imputation(
            "no complete cases to fit imputation".into(),
        ));
    }
    let missing: Vec<usize> = (0..3).filter(|&k| partial[k].is_none()).collect();
    let group: Vec<&[f64; 3]> = complete
        .iter()
        .filter(|c| {
            observed.iter().all(|&k| {
                flag(Biomarker::ALL[k], c[k], thresholds)
                    == flag(Biomarker::ALL[k], partial[k].unwrap(), thresholds)
            })
        })
        .collect();
    let min_cases = observed.len() + 5;
    let cases: Vec<&[f64; 3]> = if group.len() >= min_cases {
        group
    } else {
        complete.iter().collect()
    };
    let design = DMatrix::from_fn(cases.len(), observed.len() + 1, |i, c| {
        if c == 0 {
            1.0
        } else {
            let k = observed[c - 1];
            to_reg(Biomarker::ALL[k], cases[i][k])
        }
    });
    let x0: Vec<f64> = std::iter::once(1.0)
        .chain(
            observed
                .iter()
                .map(|&k| to_reg(Biomarker::ALL[k], partial[k].unwrap())),
        )
        .collect();
    let svd = design.clone().svd(true, true);
    let mut rng = rng;
    let mut out = [0.0; 3];
    for &k in &observed {
        out[k] = partial[k].unwrap();
    }
    for &k in &missing {
        let b = Biomarker::ALL[k];
        let y = DVector::from_iterator(cases.len(), cases.iter().map(|c| to_reg(b, c[k])));
        let coef = svd
            .solve(&y, 1e-12)
            .map_err(|e| HarmonizeError::Imputation(format!("regression failed: {e}")))?;
        let mut pred: f64 = coef.iter().zip(&x0).map(|(c, x)| c * x).sum();
        if mode == ImputationMode::Stochastic {
            if let Some(r) = rng.as_deref_mut() {
                let fitted = &design * &coef;
                let i = r.random_range(0..cases.len());
                pred += y[i] - fitted[i];
            }
        }
        let floor = 0.5 * cases.iter().map(|c| c[k]).fold(f64::INFINITY, f64::min);
        let value = from_reg(b, pred);
        out[k] = if value.is_finite() && value > floor {
            value
        } else {
            floor
        };
    }
    Ok(out)
}
