use super::km::km_fit;
use super::StatsError;

/// Harrell's concordance index.
///
/// A pair `(i, j)` is comparable when `i` has an observed event and either
/// `T_i < T_j`, or `T_i == T_j` with `j` censored. The higher-risk subject
/// should fail first; tied scores count one half.
pub fn c_index(scores: &[f64], times: &[f64], events: &[bool]) -> Result<f64, StatsError> {
    super::check_lengths(&[scores.len(), times.len(), events.len()])?;
    let n = scores.len();
    // score ranks for a Fenwick tree
    let mut sorted_scores: Vec<f64> = scores.to_vec();
    sorted_scores.sort_by(f64::total_cmp);
    sorted_scores.dedup();
    let rank = |s: f64| sorted_scores.partition_point(|v| *v < s);
    let mut tree = Fenwick::new(sorted_scores.len());

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| times[b].total_cmp(&times[a]));

    let mut concordant = 0.0;
    let mut comparable = 0.0;
    let mut start = 0;
    while start < n {
        let t = times[order[start]];
        let mut end = start;
        while end < n && times[order[end]] == t {
            end += 1;
        }
        let group = &order[start..end];
        // censored subjects at the same time are still at risk for events at t
        for &j in group.iter().filter(|&&j| !events[j]) {
            tree.add(rank(scores[j]), 1.0);
        }
        for &i in group.iter().filter(|&&i| events[i]) {
            let r = rank(scores[i]);
            let lower = tree.prefix(r);
            let equal = tree.prefix(r + 1) - lower;
            let total = tree.prefix(sorted_scores.len());
            comparable += total;
            concordant += lower + 0.5 * equal;
        }
        for &i in group.iter().filter(|&&i| events[i]) {
            tree.add(rank(scores[i]), 1.0);
        }
        start = end;
    }
    if comparable == 0.0 {
        return Err(StatsError::Undefined(
            "no comparable pairs for C-index".into(),
        ));
    }
    Ok(concordant / comparable)
}

struct Fenwick {
    tree: Vec<f64>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Self {
            tree: vec![0.0; n + 1],
        }
    }

    fn add(&mut self, idx: usize, v: f64) {
        let mut i = idx + 1;
        while i < self.tree.len() {
            self.tree[i] += v;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum over ranks `< end`.
    fn prefix(&self, end: usize) -> f64 {
        let mut i = end;
        let mut s = 0.0;
        while i > 0 {
            s += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

/// Cumulative/dynamic AUC at `horizon` with inverse-probability-of-censoring
/// weights. Cases: `T ≤ h` with an event, weighted by `1/Ĝ(T−)` where `Ĝ` is
/// the Kaplan–Meier estimate of the censoring survival. Controls: `T > h`.
pub fn td_auc(
    scores: &[f64],
    times: &[f64],
    events: &[bool],
    horizon: f64,
) -> Result<f64, StatsError> {
    super::check_lengths(&[scores.len(), times.len(), events.len()])?;
    let censored: Vec<bool> = events.iter().map(|e| !e).collect();
    let censor_km = km_fit(times, &censored);

    let cases: Vec<(f64, f64)> = (0..scores.len())
        .filter(|&i| events[i] && times[i] <= horizon)
        .map(|i| {
            let g = censor_km.survival_before(times[i]);
            (scores[i], if g > 0.0 { 1.0 / g } else { 0.0 })
        })
        .collect();
    let mut controls: Vec<f64> = (0..scores.len())
        .filter(|&i| times[i] > horizon)
        .map(|i| scores[i])
        .collect();
    if cases.is_empty() || controls.is_empty() {
        return Err(StatsError::Undefined(format!(
            "td-AUC at {horizon}: {} cases, {} controls",
            cases.len(),
            controls.len()
        )));
    }
    controls.sort_by(f64::total_cmp);
    let n_controls = controls.len() as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (s, w) in cases {
        let below = controls.partition_point(|c| *c < s) as f64;
        let not_above = controls.partition_point(|c| *c <= s) as f64;
        num += w * (below + 0.5 * (not_above - below));
        den += w * n_controls;
    }
    if den == 0.0 {
        return Err(StatsError::Undefined("td-AUC: zero case weight".into()));
    }
    Ok(num / den)
}

/// Plain binary AUC (Mann–Whitney), ties count one half.
pub fn binary_auc(scores: &[f64], labels: &[bool]) -> Result<f64, StatsError> {
    super::check_lengths(&[scores.len(), labels.len()])?;
    let mut neg: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, l)| !**l)
        .map(|(s, _)| *s)
        .collect();
    let pos: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, l)| **l)
        .map(|(s, _)| *s)
        .collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(StatsError::Undefined("AUC needs both classes".into()));
    }
    neg.sort_by(f64::total_cmp);
    let total: f64 = pos
        .iter()
        .map(|s| {
            let below = neg.partition_point(|c| c < s) as f64;
            let not_above = neg.partition_point(|c| c <= s) as f64;
            below + 0.5 * (not_above - below)
        })
        .sum();
    Ok(total / (pos.len() as f64 * neg.len() as f64))
}
