//! Flat CSV views of the stage outputs.

use progress_core::dataio::Reject;
use progress_core::evalstats::{FairnessReport, LocoReport, StratumReport};
use progress_core::pipeline::{
    write_table, CvCompareReport, MetricsReport, PredictionRow, SubjectRow, TrajectoryRow,
};
use progress_core::survnet::BaselineHazard;
use progress_core::Result;
use std::path::Path;

const PARAMETERS: [&str; 3] = ["intercept", "slope", "acceleration"];

fn num(v: f64) -> String {
    v.to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn flag(b: bool) -> String {
    (b as u8).to_string()
}

/// Horizon column label, e.g. `2yr`.
fn horizon_label(h: f64) -> String {
    format!("{h}yr")
}

pub fn rejects(path: &Path, rejects: &[Reject]) -> Result<()> {
    let rows: Vec<Vec<String>> = rejects
        .iter()
        .map(|r| {
            vec![
                r.file.clone(),
                r.line.to_string(),
                r.subject_id.clone(),
                r.reason.clone(),
            ]
        })
        .collect();
    write_table(path, &["file", "line", "subject_id", "reason"], &rows)
}

pub fn features(path: &Path, names: &[String], rows: &[SubjectRow]) -> Result<()> {
    let mut header: Vec<&str> = vec!["subject_id", "center", "split", "time", "event", "atn"];
    header.extend(names.iter().map(String::as_str));
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut line = vec![
                r.subject_id.clone(),
                r.center.clone(),
                r.split.as_str().to_string(),
                num(r.time),
                flag(r.event),
                r.atn.clone(),
            ];
            line.extend(r.features.iter().copied().map(num));
            line
        })
        .collect();
    write_table(path, &header, &body)
}

pub fn trajectories(path: &Path, rows: &[TrajectoryRow]) -> Result<()> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut line = vec![r.subject_id.clone(), r.split.as_str().to_string()];
            line.extend(r.coefficients.iter().copied().map(num));
            line.extend([
                num(r.cond_var_trace),
                r.n_visits.to_string(),
                flag(r.reliable),
            ]);
            line
        })
        .collect();
    write_table(
        path,
        &[
            "subject_id",
            "split",
            "intercept",
            "slope",
            "acceleration",
            "cond_var_trace",
            "n_visits",
            "reliable",
        ],
        &body,
    )
}

pub fn history(path: &Path, epochs: impl Iterator<Item = (usize, f64, f64)>) -> Result<()> {
    let body: Vec<Vec<String>> = epochs
        .map(|(e, t, v)| vec![e.to_string(), num(t), num(v)])
        .collect();
    write_table(path, &["epoch", "train_loss", "val_loss"], &body)
}

pub fn baseline_hazard(path: &Path, hazard: &BaselineHazard) -> Result<()> {
    let body: Vec<Vec<String>> = hazard
        .times
        .iter()
        .zip(&hazard.cumulative)
        .map(|(t, h)| vec![num(*t), num(*h)])
        .collect();
    write_table(path, &["time", "H0"], &body)
}

/// Risk score, survival probability per horizon and median survival.
pub fn risk_scores(path: &Path, horizons: &[f64], preds: &[PredictionRow]) -> Result<()> {
    let surv_cols: Vec<String> = horizons
        .iter()
        .map(|h| format!("S{}", horizon_label(*h)))
        .collect();
    let mut header: Vec<&str> = vec!["subject_id", "split", "psi"];
    header.extend(surv_cols.iter().map(String::as_str));
    header.extend(["median_survival", "linear_psi"]);
    let body: Vec<Vec<String>> = preds
        .iter()
        .map(|p| {
            let mut line = vec![
                p.subject_id.clone(),
                p.split.as_str().to_string(),
                num(p.risk),
            ];
            line.extend(p.event_probability.iter().map(|e| num(1.0 - e)));
            line.extend([opt(p.median_survival), num(p.linear_risk)]);
            line
        })
        .collect();
    write_table(path, &header, &body)
}

pub fn trajectory_predictions(path: &Path, preds: &[PredictionRow]) -> Result<()> {
    let mut header = vec!["subject_id".to_string(), "split".to_string()];
    for p in PARAMETERS {
        for field in ["mean", "lo", "hi", "aleatoric_var", "epistemic_var"] {
            header.push(format!("{p}_{field}"));
        }
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let body: Vec<Vec<String>> = preds
        .iter()
        .map(|p| {
            let t = &p.trajectory;
            let mut line = vec![p.subject_id.clone(), p.split.as_str().to_string()];
            for k in 0..3 {
                line.extend(
                    [t.means[k], t.lo[k], t.hi[k], t.aleatoric[k], t.epistemic[k]].map(num),
                );
            }
            line
        })
        .collect();
    write_table(path, &header, &body)
}

pub fn trajectory_metrics(path: &Path, report: &MetricsReport) -> Result<()> {
    let body: Vec<Vec<String>> = report
        .trajectory
        .parameters
        .iter()
        .map(|m| {
            vec![
                m.parameter.clone(),
                num(m.r2),
                num(m.rmse),
                num(m.pearson_r),
                num(m.picp),
                num(m.mpiw),
                num(m.mean_aleatoric_variance),
                num(m.mean_epistemic_variance),
            ]
        })
        .collect();
    write_table(
        path,
        &[
            "parameter",
            "r2",
            "rmse",
            "pearson_r",
            "picp",
            "mpiw",
            "mean_aleatoric_var",
            "mean_epistemic_var",
        ],
        &body,
    )
}

pub fn survival_metrics(path: &Path, report: &MetricsReport) -> Result<()> {
    let mut body = Vec::new();
    for m in &report.survival.models {
        body.push(vec![
            m.model.clone(),
            "c_index".into(),
            String::new(),
            opt(m.c_index),
        ]);
        for (metric, values) in [("td_auc", &m.td_auc), ("ici", &m.ici)] {
            for v in values {
                body.push(vec![
                    m.model.clone(),
                    metric.into(),
                    num(v.horizon),
                    opt(v.value),
                ]);
            }
        }
    }
    write_table(path, &["model", "metric", "horizon", "value"], &body)
}

pub fn tertiles(path: &Path, report: &MetricsReport) -> Result<()> {
    let mut body = Vec::new();
    if let Some(t) = &report.survival.tertiles {
        for (k, name) in ["low", "intermediate", "high"].iter().enumerate() {
            let lower = if k == 0 {
                String::new()
            } else {
                num(t.cuts[k - 1])
            };
            let upper = if k == 2 {
                String::new()
            } else {
                num(t.cuts[k])
            };
            body.push(vec![
                name.to_string(),
                lower,
                upper,
                t.sizes[k].to_string(),
                num(t.event_rates[k]),
            ]);
        }
    }
    write_table(
        path,
        &["tertile", "risk_lower", "risk_upper", "n", "event_rate"],
        &body,
    )
}

pub fn comparison(path: &Path, report: &MetricsReport) -> Result<()> {
    let body: Vec<Vec<String>> = report
        .comparison
        .iter()
        .map(|c| {
            vec![
                c.model.clone(),
                opt(c.c_index),
                opt(c.delta_c_index),
                opt(c.relative_improvement_percent),
            ]
        })
        .collect();
    write_table(
        path,
        &[
            "model",
            "c_index",
            "delta_c_index",
            "relative_improvement_percent",
        ],
        &body,
    )
}

pub fn cv_folds(path: &Path, report: &CvCompareReport) -> Result<()> {
    let body: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.method.clone(),
                r.repeat.to_string(),
                r.fold.to_string(),
                num(r.c_index),
            ]
        })
        .collect();
    write_table(path, &["method", "repeat", "fold", "c_index"], &body)
}

pub fn cv_tests(path: &Path, report: &CvCompareReport) -> Result<()> {
    let body: Vec<Vec<String>> = report
        .tests
        .iter()
        .map(|t| {
            vec![
                t.comparison.clone(),
                t.test.clone(),
                num(t.mean_difference),
                opt(t.ci_lo),
                opt(t.ci_hi),
                num(t.p_value),
                num(t.p_holm),
                num(t.p_bh),
            ]
        })
        .collect();
    write_table(
        path,
        &[
            "comparison",
            "test",
            "mean_difference",
            "ci_lo",
            "ci_hi",
            "p_value",
            "p_holm",
            "p_bh",
        ],
        &body,
    )
}

pub fn loco(path: &Path, report: &LocoReport) -> Result<()> {
    let body: Vec<Vec<String>> = report
        .centers
        .iter()
        .map(|c| {
            vec![
                c.center.clone(),
                c.n.to_string(),
                c.events.to_string(),
                opt(c.c_index),
                opt(c.auc_3yr),
                opt(c.intercept_r2),
                opt(c.intercept_picp),
            ]
        })
        .collect();
    write_table(
        path,
        &[
            "center",
            "n",
            "events",
            "c_index",
            "auc_3yr",
            "intercept_r2",
            "intercept_picp",
        ],
        &body,
    )
}

fn stratum_line(s: &StratumReport) -> Vec<String> {
    vec![
        s.stratum.clone(),
        s.n.to_string(),
        num(s.event_rate),
        opt(s.c_index),
        opt(s.auc_3yr),
        opt(s.intercept_r2),
        opt(s.intercept_picp),
        opt(s.delta_c_index),
        flag(s.flagged),
        flag(s.small_sample),
    ]
}

pub fn fairness(path: &Path, report: &FairnessReport) -> Result<()> {
    let body: Vec<Vec<String>> = std::iter::once(&report.overall)
        .chain(&report.strata)
        .map(stratum_line)
        .collect();
    write_table(
        path,
        &[
            "stratum",
            "n",
            "event_rate",
            "c_index",
            "auc_3yr",
            "intercept_r2",
            "intercept_picp",
            "delta_c_index",
            "flagged",
            "small_sample",
        ],
        &body,
    )
}
