use super::StatsError;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Product-limit survival estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmCurve {
    /// Distinct event times, ascending.
    pub times: Vec<f64>,
    /// `S(t)` just after each event time.
    pub survival: Vec<f64>,
    /// Number at risk just before each event time.
    pub at_risk: Vec<usize>,
    pub events: Vec<usize>,
}

impl KmCurve {
    /// Right-continuous `S(t)`.
    pub fn survival_at(&self, t: f64) -> f64 {
        let idx = self.times.partition_point(|x| *x <= t);
        if idx == 0 {
            1.0
        } else {
            self.survival[idx - 1]
        }
    }

    /// Left limit `S(t−)`.
    pub fn survival_before(&self, t: f64) -> f64 {
        let idx = self.times.partition_point(|x| *x < t);
        if idx == 0 {
            1.0
        } else {
            self.survival[idx - 1]
        }
    }
}

pub fn km_fit(times: &[f64], events: &[bool]) -> KmCurve {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let mut curve = KmCurve {
        times: Vec::new(),
        survival: Vec::new(),
        at_risk: Vec::new(),
        events: Vec::new(),
    };
    let mut s = 1.0;
    let mut remaining = times.len();
    let mut i = 0;
    while i < order.len() {
        let t = times[order[i]];
        let mut j = i;
        let mut d = 0;
        while j < order.len() && times[order[j]] == t {
            if events[order[j]] {
                d += 1;
            }
            j += 1;
        }
        if d > 0 {
            s *= 1.0 - d as f64 / remaining as f64;
            curve.times.push(t);
            curve.survival.push(s);
            curve.at_risk.push(remaining);
            curve.events.push(d);
        }
        remaining -= j - i;
        i = j;
    }
    curve
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRankResult {
    pub chi_square: f64,
    pub df: usize,
    pub p_value: f64,
}

/// K-group log-rank test. Each group is `(times, events)`.
pub fn logrank_test(groups: &[(&[f64], &[bool])]) -> Result<LogRankResult, StatsError> {
    let k = groups.len();
    if k < 2 {
        return Err(StatsError::InsufficientData(
            "log-rank needs ≥2 groups".into(),
        ));
    }
    let mut all: Vec<(f64, bool, usize)> = Vec::new();
    for (g, (t, e)) in groups.iter().enumerate() {
        super::check_lengths(&[t.len(), e.len()])?;
        all.extend(t.iter().zip(e.iter()).map(|(a, b)| (*a, *b, g)));
    }
    if !all.iter().any(|x| x.1) {
        return Err(StatsError::Undefined("log-rank with no events".into()));
    }
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut at_risk: Vec<f64> = groups.iter().map(|(t, _)| t.len() as f64).collect();
    let mut observed = vec![0.0; k];
    let mut expected = vec![0.0; k];
    let mut var = DMatrix::<f64>::zeros(k, k);
    let mut i = 0;
    while i < all.len() {
        let t = all[i].0;
        let mut j = i;
        let mut d_g = vec![0.0; k];
        let mut leaving = vec![0.0; k];
        while j < all.len() && all[j].0 == t {
            if all[j].1 {
                d_g[all[j].2] += 1.0;
            }
            leaving[all[j].2] += 1.0;
            j += 1;
        }
        let d: f64 = d_g.iter().sum();
        let n: f64 = at_risk.iter().sum();
        if d > 0.0 {
            for g in 0..k {
                observed[g] += d_g[g];
                expected[g] += at_risk[g] * d / n;
            }
            if n > 1.0 {
                let f = d * (n - d) / (n - 1.0);
                for g in 0..k {
                    for h in 0..k {
                        let kron = if g == h { 1.0 } else { 0.0 };
                        var[(g, h)] += f * at_risk[g] / n * (kron - at_risk[h] / n);
                    }
                }
            }
        }
        for g in 0..k {
            at_risk[g] -= leaving[g];
        }
        i = j;
    }
    let m = k - 1;
    let diff = DVector::from_iterator(m, (0..m).map(|g| observed[g] - expected[g]));
    let v = var.view((0, 0), (m, m)).into_owned();
    let chi_square = match v.clone().cholesky() {
        Some(ch) => diff.dot(&ch.solve(&diff)),
        None => {
            let pinv = v
                .pseudo_inverse(1e-12)
                .map_err(|e| StatsError::Undefined(format!("log-rank variance: {e}")))?;
            diff.dot(&(pinv * &diff))
        }
    };
    let chi_square = chi_square.max(0.0);
    let p_value = chi_square_sf(chi_square, m as f64);
    Ok(LogRankResult {
        chi_square,
        df: m,
        p_value,
    })
}

pub(crate) fn chi_square_sf(x: f64, df: f64) -> f64 {
    let dist = ChiSquared::new(df).expect("positive degrees of freedom");
    dist.sf(x).clamp(0.0, 1.0)
}

/// Linear-interpolation quantile (type 7).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TertileReport {
    pub cuts: (f64, f64),
    /// 0 = low, 1 = intermediate, 2 = high risk.
    pub assignment: Vec<usize>,
    pub sizes: [usize; 3],
    pub event_rates: [f64; 3],
    pub overall: LogRankResult,
    /// (low vs mid, mid vs high, low vs high) p-values.
    pub pairwise_p: [f64; 3],
}

impl TertileReport {
    pub fn high_low_ratio(&self) -> f64 {
        self.event_rates[2] / self.event_rates[0]
    }
}

/// Splits subjects at the 1/3 and 2/3 score quantiles. Scores equal to a cut go
/// to the lower tertile.
pub fn tertile_stratify(
    scores: &[f64],
    times: &[f64],
    events: &[bool],
) -> Result<TertileReport, StatsError> {
    super::check_lengths(&[scores.len(), times.len(), events.len()])?;
    if scores.len() < 9 {
        return Err(StatsError::InsufficientData("tertiles need n ≥ 9".into()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile(&sorted, 1.0 / 3.0);
    let q2 = quantile(&sorted, 2.0 / 3.0);
    let assignment: Vec<usize> = scores
        .iter()
        .map(|&s| {
            if s <= q1 {
                0
            } else if s <= q2 {
                1
            } else {
                2
            }
        })
        .collect();
    let mut parts: [(Vec<f64>, Vec<bool>); 3] = Default::default();
    for (i, &g) in assignment.iter().enumerate() {
        parts[g].0.push(times[i]);
        parts[g].1.push(events[i]);
    }
    let sizes = [parts[0].0.len(), parts[1].0.len(), parts[2].0.len()];
    let rate = |p: &(Vec<f64>, Vec<bool>)| {
        if p.1.is_empty() {
            f64::NAN
        } else {
            p.1.iter().filter(|e| **e).count() as f64 / p.1.len() as f64
        }
    };
    let event_rates = [rate(&parts[0]), rate(&parts[1]), rate(&parts[2])];
    let nonempty: Vec<(&[f64], &[bool])> = parts
        .iter()
        .filter(|p| !p.0.is_empty())
        .map(|p| (&p.0[..], &p.1[..]))
        .collect();
    let overall = logrank_test(&nonempty)?;
    let pair = |a: usize, b: usize| -> f64 {
        if parts[a].0.is_empty() || parts[b].0.is_empty() {
            return f64::NAN;
        }
        logrank_test(&[(&parts[a].0, &parts[a].1), (&parts[b].0, &parts[b].1)])
            .map(|r| r.p_value)
            .unwrap_or(f64::NAN)
    };
    let pairwise_p = [pair(0, 1), pair(1, 2), pair(0, 2)];
    Ok(TertileReport {
        cuts: (q1, q2),
        assignment,
        sizes,
        event_rates,
        overall,
        pairwise_p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_product_limit() {
        let km = km_fit(&[1.0, 2.0, 3.0], &[true, true, false]);
        assert!((km.survival_at(1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((km.survival_at(2.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((km.survival_at(3.0) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(km.survival_at(0.5), 1.0);
    }

    #[test]
    fn all_censored_is_flat() {
        let km = km_fit(&[1.0, 2.0], &[false, false]);
        assert_eq!(km.survival_at(10.0), 1.0);
    }

    #[test]
    fn single_event_drops_to_zero() {
        let km = km_fit(&[2.5], &[true]);
        assert_eq!(km.survival_before(2.5), 1.0);
        assert_eq!(km.survival_at(2.5), 0.0);
    }

    #[test]
    fn identical_groups_are_null() {
        let t = [1.0, 2.0, 3.0, 4.0];
        let e = [true, false, true, true];
        let r = logrank_test(&[(&t, &e), (&t, &e)]).unwrap();
        assert!(r.chi_square.abs() < 1e-12);
        assert!((r.p_value - 1.0).abs() < 1e-9);
        assert_eq!(r.df, 1);
    }

    #[test]
    fn three_groups_have_two_df() {
        let t = [1.0, 2.0, 3.0, 4.0];
        let e = [true, false, true, true];
        let s = [0.5, 0.7, 1.0, 1.2];
        let r = logrank_test(&[(&t, &e), (&t, &e), (&s, &e)]).unwrap();
        assert_eq!(r.df, 2);
    }

    #[test]
    fn no_events_is_undefined() {
        let t = [1.0, 2.0];
        let e = [false, false];
        assert!(logrank_test(&[(&t, &e), (&t, &e)]).is_err());
    }

    #[test]
    fn tertiles_with_ties_split_evenly() {
        let scores = [1.0, 1.0, 2.0, 3.0, 3.0, 4.0, 5.0, 6.0, 6.0];
        let times = [5.0, 5.0, 5.0, 4.0, 4.0, 4.0, 1.0, 1.0, 1.0];
        let events = [false, false, true, false, true, true, true, true, true];
        let rep = tertile_stratify(&scores, &times, &events).unwrap();
        assert_eq!(rep.sizes, [3, 3, 3]);
        assert!(rep.event_rates[0] < rep.event_rates[1]);
        assert!(rep.event_rates[1] < rep.event_rates[2]);
    }
}
