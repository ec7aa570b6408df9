use super::{breslow_fit, BaselineHazard, SurvError};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

const MAX_ITER: usize = 100;
const SCORE_TOL: f64 = 1e-8;
const RIDGE: f64 = 1e-6;

/// Fitted proportional-hazards model with a linear predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearCox {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub hazard: BaselineHazard,
}

impl LinearCox {
    pub fn score(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum()
    }
}

/// Log partial likelihood, score vector and information matrix at `beta`.
fn derivatives(
    x: &DMatrix<f64>,
    order: &[usize],
    times: &[f64],
    events: &[bool],
    beta: &DVector<f64>,
) -> (f64, DVector<f64>, DMatrix<f64>) {
    let p = x.ncols();
    let eta = x * beta;
    let shift = eta.max();
    let mut s0 = 0.0;
    let mut s1 = DVector::zeros(p);
    let mut s2 = DMatrix::zeros(p, p);
    let mut ll = 0.0;
    let mut grad = DVector::zeros(p);
    let mut info = DMatrix::zeros(p, p);
    let mut k = 0;
    // `order` is descending in time so the risk set grows as we go.
    while k < order.len() {
        let t = times[order[k]];
        let start = k;
        while k < order.len() && times[order[k]] == t {
            let i = order[k];
            let w = (eta[i] - shift).exp();
            let xi = x.row(i).transpose();
            s0 += w;
            s1.axpy(w, &xi, 1.0);
            s2.ger(w, &xi, &xi, 1.0);
            k += 1;
        }
        let mean = &s1 / s0;
        for &i in &order[start..k] {
            if events[i] {
                ll += eta[i] - shift - s0.ln();
                grad += x.row(i).transpose() - &mean;
                info += &s2 / s0 - &mean * mean.transpose();
            }
        }
    }
    (ll, grad, info)
}

fn solve(info: &DMatrix<f64>, rhs: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let mut ridge = 0.0;
    loop {
        let mut m = info.clone();
        for d in 0..m.nrows() {
            m[(d, d)] += ridge;
        }
        if let Some(ch) = m.clone().cholesky() {
            return (ch.solve(rhs), ch.inverse());
        }
        ridge = if ridge == 0.0 { RIDGE } else { ridge * 10.0 };
        log::warn!("information matrix not positive definite; adding ridge {ridge:e}");
    }
}

/// Newton–Raphson fit of a linear Cox model (Breslow ties) with step halving.
pub fn linear_coxph_fit(
    rows: &[Vec<f64>],
    times: &[f64],
    events: &[bool],
) -> Result<LinearCox, SurvError> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if n != times.len() || n != events.len() || rows.iter().any(|r| r.len() != p) {
        return Err(SurvError::Shape("linear Cox inputs are ragged".into()));
    }
    if n <= p {
        return Err(SurvError::Degenerate(format!(
            "need n > p, got n={n}, p={p}"
        )));
    }
    if !events.iter().any(|e| *e) {
        return Err(SurvError::NoEvents);
    }
    for c in 0..p {
        let first = rows[0][c];
        if rows.iter().all(|r| r[c] == first) {
            return Err(SurvError::Degenerate(format!(
                "covariate {c} has no variance"
            )));
        }
    }
    let x = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| times[b].total_cmp(&times[a]));

    let mut beta = DVector::zeros(p);
    let (mut ll, mut grad, mut info) = derivatives(&x, &order, times, events, &beta);
    let mut converged = grad.norm() < SCORE_TOL;
    let mut iterations = 0;
    while !converged && iterations < MAX_ITER {
        iterations += 1;
        let (step, _) = solve(&info, &grad);
        let mut scale = 1.0;
        loop {
            let cand = &beta + &step * scale;
            let (l2, g2, i2) = derivatives(&x, &order, times, events, &cand);
            if l2.is_finite() && (l2 >= ll - 1e-12 || scale < 1e-8) {
                beta = cand;
                ll = l2;
                grad = g2;
                info = i2;
                break;
            }
            scale *= 0.5;
        }
        converged = grad.norm() < SCORE_TOL;
    }
    if !converged {
        log::warn!(
            "linear Cox did not converge in {MAX_ITER} iterations (|U|={:e})",
            grad.norm()
        );
    }
    let (_, cov) = solve(&info, &grad);
    let scores: Vec<f64> = (x * &beta).iter().copied().collect();
    Ok(LinearCox {
        coefficients: beta.iter().copied().collect(),
        std_errors: (0..p).map(|d| cov[(d, d)].max(0.0).sqrt()).collect(),
        log_likelihood: ll,
        iterations,
        converged,
        hazard: breslow_fit(&scores, times, events)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_covariate_rejected() {
        let rows = vec![vec![1.0]; 5];
        let r = linear_coxph_fit(&rows, &[1.0, 2.0, 3.0, 4.0, 5.0], &[true; 5]);
        assert!(matches!(r, Err(SurvError::Degenerate(_))));
    }

    #[test]
    fn score_is_zero_at_optimum() {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![(i as f64 * 0.7).sin()]).collect();
        let times = [5.0, 3.0, 6.0, 2.0, 8.0, 1.0, 4.0, 7.0];
        let events = [true, true, false, true, true, true, false, true];
        let fit = linear_coxph_fit(&rows, &times, &events).unwrap();
        assert!(fit.converged);
        let h = 1e-5;
        let ll = |b: f64| {
            let s: Vec<f64> = rows.iter().map(|r| r[0] * b).collect();
            -super::super::cox_partial_likelihood(&s, &times, &events).unwrap()
        };
        let b = fit.coefficients[0];
        assert!(((ll(b + h) - ll(b - h)) / (2.0 * h)).abs() < 1e-6);
        assert!((ll(b) - fit.log_likelihood).abs() < 1e-9);
    }
}
