use super::SurvError;
use crate::evalstats::km_fit;

const GROUPS: usize = 10;
const SPAN: f64 = 0.75;

/// Local-linear regression with tricube weights evaluated at `x0`. Falls back
/// to a weighted local mean when the neighbourhood has no spread in `x`.
fn loess_at(xs: &[f64], ys: &[f64], x0: f64) -> f64 {
    let k = ((SPAN * xs.len() as f64).ceil() as usize).clamp(1, xs.len());
    let mut dist: Vec<f64> = xs.iter().map(|x| (x - x0).abs()).collect();
    dist.sort_by(f64::total_cmp);
    let bandwidth = dist[k - 1];
    let weights: Vec<f64> = xs
        .iter()
        .map(|x| {
            if bandwidth <= 0.0 {
                if (x - x0).abs() == 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                let u = (x - x0).abs() / bandwidth;
                if u < 1.0 {
                    (1.0 - u.powi(3)).powi(3)
                } else {
                    0.0
                }
            }
        })
        .collect();
    let sw: f64 = weights.iter().sum();
    let mx = weights.iter().zip(xs).map(|(w, x)| w * x).sum::<f64>() / sw;
    let my = weights.iter().zip(ys).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = weights
        .iter()
        .zip(xs)
        .map(|(w, x)| w * (x - mx).powi(2))
        .sum();
    if sxx <= 1e-14 * sw.max(1.0) {
        return my;
    }
    let sxy: f64 = weights
        .iter()
        .zip(xs.iter().zip(ys))
        .map(|(w, (x, y))| w * (x - mx) * (y - my))
        .sum();
    my + sxy / sxx * (x0 - mx)
}

/// Integrated calibration index at `horizon`.
///
/// Subjects are split into ten equal-size groups by predicted event
/// probability; each group's observed probability is `1 − KM(horizon)`. The
/// observed-vs-predicted relation is smoothed by local-linear regression and
/// the result is the size-weighted mean absolute gap.
pub fn ici(
    predicted: &[f64],
    times: &[f64],
    events: &[bool],
    horizon: f64,
) -> Result<f64, SurvError> {
    let n = predicted.len();
    if n != times.len() || n != events.len() {
        return Err(SurvError::Shape("ICI inputs differ in length".into()));
    }
    if n < GROUPS {
        return Err(SurvError::InsufficientData(format!(
            "ICI needs ≥{GROUPS} subjects, got {n}"
        )));
    }
    if predicted.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(SurvError::Degenerate(
            "predicted probabilities must lie in [0, 1]".into(),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| predicted[a].total_cmp(&predicted[b]));
    let mut mean_pred = Vec::with_capacity(GROUPS);
    let mut observed = Vec::with_capacity(GROUPS);
    let mut sizes = Vec::with_capacity(GROUPS);
    for g in 0..GROUPS {
        let members = &order[g * n / GROUPS..(g + 1) * n / GROUPS];
        let t: Vec<f64> = members.iter().map(|&i| times[i]).collect();
        let e: Vec<bool> = members.iter().map(|&i| events[i]).collect();
        mean_pred.push(members.iter().map(|&i| predicted[i]).sum::<f64>() / members.len() as f64);
        observed.push(1.0 - km_fit(&t, &e).survival_at(horizon));
        sizes.push(members.len() as f64);
    }
    let total: f64 = sizes.iter().sum();
    Ok((0..GROUPS)
        .map(|g| sizes[g] * (loess_at(&mean_pred, &observed, mean_pred[g]) - mean_pred[g]).abs())
        .sum::<f64>()
        / total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_offset() {
        // 100 subjects, every block of ten has two events before the horizon.
        let times: Vec<f64> = (0..100)
            .map(|i| if i % 10 < 2 { 1.0 } else { 10.0 })
            .collect();
        let events = vec![true; 100];
        let pred = vec![0.5; 100];
        let v = ici(&pred, &times, &events, 3.0).unwrap();
        assert!((v - 0.3).abs() < 1e-12, "{v}");
    }

    #[test]
    fn perfectly_calibrated_groups() {
        // group g has g events among 10 before the horizon, predicted g/10.
        let mut pred = Vec::new();
        let mut times = Vec::new();
        for g in 0..10 {
            for k in 0..10 {
                pred.push(g as f64 / 10.0);
                times.push(if k < g { 1.0 } else { 10.0 });
            }
        }
        let events = vec![true; 100];
        assert!(ici(&pred, &times, &events, 3.0).unwrap() < 1e-12);
    }

    #[test]
    fn too_few_subjects() {
        assert!(ici(&[0.1; 5], &[1.0; 5], &[true; 5], 1.0).is_err());
    }
}
