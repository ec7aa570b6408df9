use super::{MixedError, MixedModel, Series, SubjectStats};
use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

type Params = SVector<f64, 7>;

/// Lower bound on log-scale parameters; keeps the criterion flat (and finite)
/// when a variance component collapses to zero.
const LOG_FLOOR: f64 = -23.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemlOptions {
    pub max_iter: usize,
    /// Convergence threshold on the per-iteration criterion improvement.
    pub tol: f64,
    pub min_subjects: usize,
    pub min_visits: usize,
}

impl Default for RemlOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-8,
            min_subjects: 30,
            min_visits: 3,
        }
    }
}

/// Random-effect Cholesky factor (log-diagonal) and residual variance.
fn unpack(p: &Params) -> (Matrix3<f64>, f64) {
    let d = |v: f64| v.max(LOG_FLOOR).exp();
    let l = Matrix3::new(d(p[0]), 0.0, 0.0, p[1], d(p[2]), 0.0, p[3], p[4], d(p[5]));
    (l, p[6].max(LOG_FLOOR).exp())
}

struct Evaluation {
    criterion: f64,
    beta: Vector3<f64>,
    info: Matrix3<f64>,
}

/// Restricted log-likelihood with fixed effects profiled out by GLS.
fn evaluate(stats: &[SubjectStats], p: &Params) -> Option<Evaluation> {
    let (l, s2) = unpack(p);
    let mut logdet_v = 0.0;
    let mut xvx = Matrix3::zeros();
    let mut xvy = Vector3::zeros();
    let mut yvy = 0.0;
    let mut n_total = 0usize;
    let sigma_u = l * l.transpose();
    for st in stats {
        n_total += st.n;
        if let Some(ols) = &st.ols {
            // With an identifiable per-subject quadratic, ZᵀV⁻¹Z = (σ²(ZᵀZ)⁻¹ + Σ)⁻¹;
            // this form stays accurate when σ² is tiny relative to Σ.
            let m = ols.ztz_inv * s2 + sigma_u;
            let ch = ((m + m.transpose()) * 0.5).cholesky()?;
            let m_inv = ch.inverse();
            let logdet_m = 2.0 * ch.l().diagonal().map(f64::ln).sum();
            logdet_v += (st.n as f64 - 3.0) * s2.ln() + ols.logdet_ztz + logdet_m;
            xvx += m_inv;
            let mc = m_inv * ols.coef;
            xvy += mc;
            yvy += ols.rss / s2 + ols.coef.dot(&mc);
            continue;
        }
        let k = Matrix3::identity() * s2 + l.transpose() * st.ztz * l;
        let ch = k.cholesky()?;
        let logdet_k = 2.0 * ch.l().diagonal().map(f64::ln).sum();
        logdet_v += st.n as f64 * s2.ln() + logdet_k - 3.0 * s2.ln();
        let proj = l * ch.inverse() * l.transpose();
        let a_proj = st.ztz * proj;
        xvx += (st.ztz - a_proj * st.ztz) / s2;
        xvy += (st.zty - a_proj * st.zty) / s2;
        yvy += (st.yty - st.zty.dot(&(proj * st.zty))) / s2;
    }
    let xvx = (xvx + xvx.transpose()) * 0.5;
    let ch = xvx.cholesky()?;
    let beta = ch.solve(&xvy);
    let quad = yvy - beta.dot(&xvy);
    let logdet_info = 2.0 * ch.l().diagonal().map(f64::ln).sum();
    let criterion = -0.5
        * (logdet_v
            + logdet_info
            + quad
            + (n_total as f64 - 3.0) * (2.0 * std::f64::consts::PI).ln());
    criterion.is_finite().then_some(Evaluation {
        criterion,
        beta,
        info: xvx,
    })
}

fn objective(stats: &[SubjectStats], p: &Params) -> f64 {
    evaluate(stats, p).map_or(f64::INFINITY, |e| -e.criterion)
}

fn numerical_gradient(stats: &[SubjectStats], p: &Params) -> Params {
    const H: f64 = 1e-5;
    Params::from_fn(|i, _| {
        let mut up = *p;
        let mut down = *p;
        up[i] += H;
        down[i] -= H;
        (objective(stats, &up) - objective(stats, &down)) / (2.0 * H)
    })
}

/// Moment-based starting values: per-subject least-squares coefficients give
/// the random-effect spread, their residuals the noise level.
fn initial_params(series: &[Series]) -> Params {
    let mut coefs = Vec::new();
    let mut rss = 0.0;
    let mut df = 0.0;
    for s in series.iter().filter(|s| s.times.len() >= 4) {
        let st = s.stats();
        if let Some(inv) = st.ztz.try_inverse() {
            let c = inv * st.zty;
            rss += st.yty - c.dot(&st.zty);
            df += st.n as f64 - 3.0;
            coefs.push(c);
        }
    }
    let all: Vec<f64> = series
        .iter()
        .flat_map(|s| s.values.iter().copied())
        .collect();
    let mean = all.iter().sum::<f64>() / all.len().max(1) as f64;
    let var_y = all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / all.len().max(2) as f64;
    let var_y = var_y.max(1e-8);
    let s2 = if df > 0.0 && rss > 0.0 {
        rss / df
    } else {
        0.5 * var_y
    };
    let mut sd = [var_y.sqrt() * 0.5, var_y.sqrt() * 0.1, var_y.sqrt() * 0.01];
    if coefs.len() >= 5 {
        let m = coefs.iter().fold(Vector3::zeros(), |a, c| a + c) / coefs.len() as f64;
        for (k, s) in sd.iter_mut().enumerate() {
            let v =
                coefs.iter().map(|c| (c[k] - m[k]).powi(2)).sum::<f64>() / (coefs.len() - 1) as f64;
            *s = (0.5 * v).sqrt().max(1e-4 * var_y.sqrt());
        }
    }
    Params::from_column_slice(&[
        sd[0].ln(),
        0.0,
        sd[1].ln(),
        0.0,
        0.0,
        sd[2].ln(),
        s2.max(1e-8).ln(),
    ])
}

/// Fits the quadratic random-intercept/slope/acceleration model by REML
/// using BFGS over the Cholesky factor of the random-effect covariance
/// (log-diagonal) and the log residual variance.
pub fn reml_fit(series: &[Series], options: RemlOptions) -> Result<MixedModel, MixedError> {
    let eligible = series
        .iter()
        .filter(|s| s.times.len() >= options.min_visits)
        .count();
    if eligible < options.min_subjects {
        return Err(MixedError::InsufficientData(format!(
            "{eligible} subjects with ≥{} visits, need ≥{}",
            options.min_visits, options.min_subjects
        )));
    }
    if series.iter().any(|s| s.times.len() != s.values.len()) {
        return Err(MixedError::Invalid(
            "times and values differ in length".into(),
        ));
    }
    let stats: Vec<SubjectStats> = series
        .iter()
        .filter(|s| !s.times.is_empty())
        .map(Series::stats)
        .collect();

    let mut p = initial_params(series);
    let mut f = objective(&stats, &p);
    if !f.is_finite() {
        return Err(MixedError::Singular);
    }
    let mut g = numerical_gradient(&stats, &p);
    let mut h_inv = SMatrix::<f64, 7, 7>::identity();
    let mut history = vec![-f];
    let mut converged = false;
    let mut iterations = 0;
    let mut reset = false;
    while iterations < options.max_iter {
        iterations += 1;
        let mut dir = -(h_inv * g);
        if dir.dot(&g) >= 0.0 {
            h_inv = SMatrix::identity();
            dir = -g;
        }
        let slope = dir.dot(&g);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand = p + dir * step;
            let fc = objective(&stats, &cand);
            if fc.is_finite() && fc <= f + 1e-4 * step * slope {
                accepted = Some((cand, fc));
                break;
            }
            step *= 0.5;
        }
        let Some((p_new, f_new)) = accepted else {
            if reset {
                converged = true;
                break;
            }
            // Line search failed: restart from steepest descent once.
            reset = true;
            h_inv = SMatrix::identity();
            continue;
        };
        reset = false;
        let improvement = f - f_new;
        let g_new = numerical_gradient(&stats, &p_new);
        let s = p_new - p;
        let y = g_new - g;
        let sy = s.dot(&y);
        if sy > 1e-12 {
            let rho = 1.0 / sy;
            let i7 = SMatrix::<f64, 7, 7>::identity();
            h_inv = (i7 - s * y.transpose() * rho) * h_inv * (i7 - y * s.transpose() * rho)
                + s * s.transpose() * rho;
        }
        p = p_new;
        f = f_new;
        g = g_new;
        history.push(-f);
        if improvement < options.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(MixedError::NoConvergence {
            iterations,
            criterion: -f,
        });
    }
    let eval = evaluate(&stats, &p).ok_or(MixedError::Singular)?;
    let cov_beta = eval.info.try_inverse().ok_or(MixedError::Singular)?;
    let (l, s2) = unpack(&p);
    let sigma_u = l * l.transpose();
    Ok(MixedModel {
        fixed: [eval.beta[0], eval.beta[1], eval.beta[2]],
        fixed_se: std::array::from_fn(|k| cov_beta[(k, k)].max(0.0).sqrt()),
        sigma_u: std::array::from_fn(|i| std::array::from_fn(|j| sigma_u[(i, j)])),
        sigma2: s2,
        reml_criterion: eval.criterion,
        iterations,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_replicates_recover_exact_fixed_effects() {
        let times = vec![0.0, 1.0, 2.0, 3.5, 5.0];
        let values: Vec<f64> = times.iter().map(|t| 1.5 + 0.4 * t + 0.03 * t * t).collect();
        let series = vec![Series::new(times, values); 50];
        let m = reml_fit(&series, RemlOptions::default()).unwrap();
        assert!((m.fixed[0] - 1.5).abs() < 1e-6);
        assert!((m.fixed[1] - 0.4).abs() < 1e-6);
        assert!((m.fixed[2] - 0.03).abs() < 1e-6);
    }

    #[test]
    fn too_few_subjects() {
        let s = Series::new(vec![0.0, 1.0, 2.0], vec![1.0, 2.0, 3.0]);
        assert!(matches!(
            reml_fit(&vec![s; 10], RemlOptions::default()),
            Err(MixedError::InsufficientData(_))
        ));
    }
}
