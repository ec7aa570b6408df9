use super::SurvError;

fn check(scores: &[f64], times: &[f64], events: &[bool]) -> Result<(), SurvError> {
    if scores.len() != times.len() || times.len() != events.len() {
        return Err(SurvError::Shape(format!(
            "scores {}, times {}, events {}",
            scores.len(),
            times.len(),
            events.len()
        )));
    }
    Ok(())
}

/// Indices sorted by ascending time.
fn time_order(times: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    order
}

/// Negative Cox log partial likelihood (Breslow ties) and its gradient with
/// respect to each score.
///
/// The risk set of subject `i` is every subject still under observation at
/// `T_i`, including ties. Exponentials are shifted by the maximum score.
pub fn cox_loss_and_grad(
    scores: &[f64],
    times: &[f64],
    events: &[bool],
) -> Result<(f64, Vec<f64>), SurvError> {
    check(scores, times, events)?;
    if !events.iter().any(|e| *e) {
        return Err(SurvError::NoEvents);
    }
    let n = scores.len();
    let shift = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = scores.iter().map(|s| (s - shift).exp()).collect();
    let order = time_order(times);

    // Risk-set sums at the first index of each tie group, walking backward.
    let mut risk_sum = vec![0.0; n];
    let mut acc = 0.0;
    let mut k = n;
    while k > 0 {
        let t = times[order[k - 1]];
        let mut start = k - 1;
        while start > 0 && times[order[start - 1]] == t {
            start -= 1;
        }
        for &i in &order[start..k] {
            acc += w[i];
        }
        for &i in &order[start..k] {
            risk_sum[i] = acc;
        }
        k = start;
    }

    let mut loss = 0.0;
    let mut grad = vec![0.0; n];
    // Cumulative Σ 1/S over events with T_i ≤ t, walking forward.
    let mut inv_acc = 0.0;
    let mut k = 0;
    while k < n {
        let t = times[order[k]];
        let mut end = k;
        while end < n && times[order[end]] == t {
            end += 1;
        }
        for &i in &order[k..end] {
            if events[i] {
                loss -= scores[i] - shift - risk_sum[i].ln();
                inv_acc += 1.0 / risk_sum[i];
                grad[i] -= 1.0;
            }
        }
        for &i in &order[k..end] {
            grad[i] += w[i] * inv_acc;
        }
        k = end;
    }
    Ok((loss, grad))
}

/// Negative Cox log partial likelihood.
pub fn cox_partial_likelihood(
    scores: &[f64],
    times: &[f64],
    events: &[bool],
) -> Result<f64, SurvError> {
    cox_loss_and_grad(scores, times, events).map(|(l, _)| l)
}

/// Mean hinge loss over comparable pairs (`T_i < T_j`, `δ_i = 1`) pushing the
/// earlier-failing subject's score above the later one's by `margin`, with its
/// gradient. Returns zero when no pair is comparable.
pub fn ranking_loss_and_grad(
    scores: &[f64],
    times: &[f64],
    events: &[bool],
    margin: f64,
) -> Result<(f64, Vec<f64>), SurvError> {
    check(scores, times, events)?;
    let n = scores.len();
    let order = time_order(times);
    let mut grad = vec![0.0; n];
    let mut total = 0.0;
    let mut pairs = 0usize;
    for (a, &i) in order.iter().enumerate() {
        if !events[i] {
            continue;
        }
        for &j in &order[a + 1..] {
            if times[j] <= times[i] {
                continue;
            }
            pairs += 1;
            let h = scores[j] - scores[i] + margin;
            if h > 0.0 {
                total += h;
                grad[j] += 1.0;
                grad[i] -= 1.0;
            }
        }
    }
    if pairs == 0 {
        return Ok((0.0, grad));
    }
    let scale = 1.0 / pairs as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok((total * scale, grad))
}

pub fn ranking_loss(
    scores: &[f64],
    times: &[f64],
    events: &[bool],
    margin: f64,
) -> Result<f64, SurvError> {
    ranking_loss_and_grad(scores, times, events, margin).map(|(l, _)| l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_subject_closed_form() {
        let (a, b) = (0.3, -1.2);
        let l = cox_partial_likelihood(&[a, b], &[1.0, 2.0], &[true, false]).unwrap();
        let expected = -(a - (a.exp() + b.exp()).ln());
        assert!((l - expected).abs() < 1e-12);
    }

    #[test]
    fn equal_scores_sum_log_risk_sizes() {
        let times = [1.0, 2.0, 3.0, 4.0, 5.0];
        let events = [true, false, true, true, false];
        let l = cox_partial_likelihood(&[0.7; 5], &times, &events).unwrap();
        let expected = 5f64.ln() + 3f64.ln() + 2f64.ln();
        assert!((l - expected).abs() < 1e-12);
    }

    #[test]
    fn no_events_is_error() {
        assert!(matches!(
            cox_partial_likelihood(&[0.0, 1.0], &[1.0, 2.0], &[false, false]),
            Err(SurvError::NoEvents)
        ));
    }

    #[test]
    fn ranking_margin_cases() {
        let l = ranking_loss(&[1.0, 0.0], &[1.0, 2.0], &[true, false], 0.5).unwrap();
        assert_eq!(l, 0.0);
        let l = ranking_loss(&[0.4, 0.4], &[1.0, 2.0], &[true, true], 0.1).unwrap();
        assert!((l - 0.1).abs() < 1e-15);
        assert_eq!(
            ranking_loss(&[0.0, 1.0], &[1.0, 2.0], &[false, false], 0.1).unwrap(),
            0.0
        );
    }
}
