use super::{c_index, picp_mpiw, regression_metrics, td_auc, TrajectoryEval};
use serde::{Deserialize, Serialize};

/// Gap in C-index from the overall cohort above which a stratum is flagged.
pub const FAIRNESS_DELTA_THRESHOLD: f64 = 0.05;
/// Strata smaller than this are reported with a small-sample flag.
pub const SMALL_STRATUM_N: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct FairnessSubject {
    pub female: bool,
    pub age: f64,
    pub education: f64,
    pub time: f64,
    pub event: bool,
    pub risk: f64,
    /// `(pred, truth, lo, hi)` for the intercept, when the subject has a reliable target.
    pub intercept: Option<(f64, f64, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumReport {
    pub stratum: String,
    pub n: usize,
    pub event_rate: f64,
    pub c_index: Option<f64>,
    pub auc_3yr: Option<f64>,
    pub intercept_r2: Option<f64>,
    pub intercept_picp: Option<f64>,
    pub delta_c_index: Option<f64>,
    pub flagged: bool,
    pub small_sample: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub overall: StratumReport,
    pub strata: Vec<StratumReport>,
    pub education_median: f64,
}

fn evaluate(name: &str, subjects: &[&FairnessSubject]) -> StratumReport {
    let risk: Vec<f64> = subjects.iter().map(|s| s.risk).collect();
    let times: Vec<f64> = subjects.iter().map(|s| s.time).collect();
    let events: Vec<bool> = subjects.iter().map(|s| s.event).collect();
    let mut tr = TrajectoryEval::default();
    for (p, t, l, h) in subjects.iter().filter_map(|s| s.intercept) {
        tr.pred.push(p);
        tr.truth.push(t);
        tr.lo.push(l);
        tr.hi.push(h);
    }
    let n = subjects.len();
    StratumReport {
        stratum: name.to_string(),
        n,
        event_rate: if n == 0 {
            f64::NAN
        } else {
            events.iter().filter(|e| **e).count() as f64 / n as f64
        },
        c_index: c_index(&risk, &times, &events).ok(),
        auc_3yr: td_auc(&risk, &times, &events, 3.0).ok(),
        intercept_r2: regression_metrics(&tr.pred, &tr.truth).ok().map(|m| m.r2),
        intercept_picp: picp_mpiw(&tr.lo, &tr.hi, &tr.truth).ok().map(|m| m.picp),
        delta_c_index: None,
        flagged: false,
        small_sample: n < SMALL_STRATUM_N,
    }
}

/// Per-stratum performance for sex, age (≤70 / >70) and education
/// (below / at-or-above median), with the C-index deviation from overall.
pub fn fairness_strata(subjects: &[FairnessSubject]) -> FairnessReport {
    let all: Vec<&FairnessSubject> = subjects.iter().collect();
    let overall = evaluate("Overall", &all);
    let mut edu: Vec<f64> = subjects.iter().map(|s| s.education).collect();
    edu.sort_by(f64::total_cmp);
    let education_median = if edu.is_empty() {
        f64::NAN
    } else {
        super::quantile(&edu, 0.5)
    };
    type Pred = Box<dyn Fn(&FairnessSubject) -> bool>;
    let defs: Vec<(&str, Pred)> = vec![
        ("Female", Box::new(|s: &FairnessSubject| s.female)),
        ("Male", Box::new(|s: &FairnessSubject| !s.female)),
        ("Age <= 70", Box::new(|s: &FairnessSubject| s.age <= 70.0)),
        ("Age > 70", Box::new(|s: &FairnessSubject| s.age > 70.0)),
        (
            "Low Education",
            Box::new(move |s: &FairnessSubject| s.education < education_median),
        ),
        (
            "High Education",
            Box::new(move |s: &FairnessSubject| s.education >= education_median),
        ),
    ];
    let strata = defs
        .iter()
        .map(|(name, pred)| {
            let members: Vec<&FairnessSubject> = subjects.iter().filter(|s| pred(s)).collect();
            let mut rep = evaluate(name, &members);
            if let (Some(c), Some(o)) = (rep.c_index, overall.c_index) {
                rep.delta_c_index = Some(c - o);
                rep.flagged = (c - o).abs() > FAIRNESS_DELTA_THRESHOLD;
            }
            rep
        })
        .collect();
    FairnessReport {
        overall,
        strata,
        education_median,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn subject(i: usize, age: f64) -> FairnessSubject {
        let t = 1.0 + (i % 10) as f64;
        FairnessSubject {
            female: true,
            age,
            education: 16.0,
            time: t,
            event: !i.is_multiple_of(3),
            risk: -t,
            intercept: None,
        }
    }

    #[test]
    fn single_stratum_has_zero_delta() {
        let subjects: Vec<FairnessSubject> = (0..40).map(|i| subject(i, 65.0)).collect();
        let rep = fairness_strata(&subjects);
        let female = rep.strata.iter().find(|s| s.stratum == "Female").unwrap();
        assert_eq!(female.delta_c_index, Some(0.0));
        assert!(!female.flagged);
    }

    #[test]
    fn age_seventy_is_in_lower_stratum() {
        let subjects: Vec<FairnessSubject> = (0..12).map(|i| subject(i, 70.0)).collect();
        let rep = fairness_strata(&subjects);
        let low = rep
            .strata
            .iter()
            .find(|s| s.stratum == "Age <= 70")
            .unwrap();
        let high = rep.strata.iter().find(|s| s.stratum == "Age > 70").unwrap();
        assert_eq!((low.n, high.n), (12, 0));
        assert!(low.small_sample);
    }
}
