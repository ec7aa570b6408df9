//! Quadratic linear mixed-effects model for longitudinal CDR-SB: REML
//! estimation, empirical-Bayes subject trajectories and a reliability rule.
//!
//! Every subject's design is `[1, t, t²]` for both fixed and random effects,
//! so all per-subject linear algebra reduces (via Woodbury) to 3×3 systems
//! built from the sufficient statistics `ZᵀZ`, `Zᵀy` and `yᵀy`.

mod reml;

pub use reml::{reml_fit, RemlOptions};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default minimum number of visits for a reliable trajectory.
pub const DEFAULT_MIN_VISITS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MixedError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("REML did not converge after {iterations} iterations (last criterion {criterion})")]
    NoConvergence { iterations: usize, criterion: f64 },
    #[error("singular fixed-effects information matrix")]
    Singular,
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// One subject's observations: times in years from baseline and outcomes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl Series {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Self {
        Self { times, values }
    }

    pub(crate) fn stats(&self) -> SubjectStats {
        let mut s = SubjectStats::default();
        for (&t, &y) in self.times.iter().zip(&self.values) {
            let z = Vector3::new(1.0, t, t * t);
            s.ztz += z * z.transpose();
            s.zty += z * y;
            s.yty += y * y;
            s.n += 1;
        }
        if s.n >= 3 {
            let eig = s.ztz.symmetric_eigen().eigenvalues;
            if eig.min() > 1e-9 * eig.max() {
                if let Some(ch) = s.ztz.cholesky() {
                    let coef = ch.solve(&s.zty);
                    let rss = self
                        .times
                        .iter()
                        .zip(&self.values)
                        .map(|(&t, &y)| (y - coef[0] - coef[1] * t - coef[2] * t * t).powi(2))
                        .sum();
                    s.ols = Some(SubjectOls {
                        coef,
                        rss,
                        ztz_inv: ch.inverse(),
                        logdet_ztz: 2.0 * ch.l().diagonal().map(f64::ln).sum(),
                    });
                }
            }
        }
        s
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct SubjectStats {
    pub ztz: Matrix3<f64>,
    pub zty: Vector3<f64>,
    pub yty: f64,
    pub n: usize,
    /// Per-subject least-squares fit, present when the quadratic is identifiable.
    pub ols: Option<SubjectOls>,
}

#[derive(Debug, Clone)]
pub(crate) struct SubjectOls {
    pub coef: Vector3<f64>,
    pub rss: f64,
    pub ztz_inv: Matrix3<f64>,
    pub logdet_ztz: f64,
}

/// Fitted population model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedModel {
    /// Intercept, slope (per year) and acceleration (per year²).
    pub fixed: [f64; 3],
    pub fixed_se: [f64; 3],
    /// Random-effect covariance.
    pub sigma_u: [[f64; 3]; 3],
    pub sigma2: f64,
    pub reml_criterion: f64,
    pub iterations: usize,
    /// Criterion after each accepted iteration.
    pub history: Vec<f64>,
}

impl MixedModel {
    pub fn sigma_u_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.sigma_u[i][j])
    }

    fn sqrt_sigma_u(&self) -> Matrix3<f64> {
        let s = self.sigma_u_matrix();
        match s.cholesky() {
            Some(ch) => ch.l(),
            None => {
                // PSD but singular: symmetric square root via eigendecomposition.
                let eig = s.symmetric_eigen();
                let d = Matrix3::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
                eig.eigenvectors * d * eig.eigenvectors.transpose()
            }
        }
    }

    /// Empirical-Bayes (BLUP) trajectory of one subject. Coefficients are
    /// totals (fixed + random); the covariance is the conditional covariance
    /// of the random effects given the observations.
    pub fn eb_estimate(&self, series: &Series) -> TrajectoryParams {
        let st = series.stats();
        let l = self.sqrt_sigma_u();
        let k = Matrix3::identity() * self.sigma2 + l.transpose() * st.ztz * l;
        let k_inv = k.try_inverse().unwrap_or_else(Matrix3::zeros);
        let beta = Vector3::from(self.fixed);
        let ztr = st.zty - st.ztz * beta;
        let b = l * k_inv * l.transpose() * ztr;
        let cov = l * k_inv * l.transpose() * self.sigma2;
        let cov = (cov + cov.transpose()) * 0.5;
        let theta = beta + b;
        TrajectoryParams {
            alpha: theta[0],
            beta: theta[1],
            gamma: theta[2],
            cond_cov: std::array::from_fn(|i| std::array::from_fn(|j| cov[(i, j)])),
            cond_var_trace: cov.trace(),
            n_visits: st.n,
            reliable: false,
        }
    }
}

/// Subject-level trajectory coefficients with their conditional uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub cond_cov: [[f64; 3]; 3],
    pub cond_var_trace: f64,
    pub n_visits: usize,
    pub reliable: bool,
}

impl TrajectoryParams {
    pub fn as_array(&self) -> [f64; 3] {
        [self.alpha, self.beta, self.gamma]
    }
}

/// A trajectory is reliable when it rests on at least `min_visits` visits
/// and its conditional-variance trace does not exceed `tau_var`.
pub fn reliability_filter(params: &TrajectoryParams, tau_var: f64, min_visits: usize) -> bool {
    params.n_visits >= min_visits && params.cond_var_trace <= tau_var
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(sigma2: f64) -> MixedModel {
        MixedModel {
            fixed: [1.0, 0.5, 0.05],
            fixed_se: [0.0; 3],
            sigma_u: [[1.0, 0.1, 0.0], [0.1, 0.25, 0.01], [0.0, 0.01, 0.01]],
            sigma2,
            reml_criterion: 0.0,
            iterations: 0,
            history: vec![],
        }
    }

    #[test]
    fn empty_series_returns_prior() {
        let m = model(0.5);
        let p = m.eb_estimate(&Series::default());
        assert_eq!(p.as_array(), m.fixed);
        for i in 0..3 {
            for j in 0..3 {
                assert!((p.cond_cov[i][j] - m.sigma_u[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn vanishing_noise_interpolates() {
        let m = model(1e-10);
        let (a, b, c) = (2.0, -0.3, 0.2);
        let times = vec![0.0, 1.3, 2.9];
        let values = times.iter().map(|t| a + b * t + c * t * t).collect();
        let p = m.eb_estimate(&Series::new(times, values));
        assert!((p.alpha - a).abs() < 1e-4);
        assert!((p.beta - b).abs() < 1e-4);
        assert!((p.gamma - c).abs() < 1e-4);
    }

    #[test]
    fn shrinkage_toward_population_slope() {
        let m = model(0.5);
        let times = vec![0.0, 1.0, 2.0];
        let values = vec![1.0, 4.5, 8.0];
        let p = m.eb_estimate(&Series::new(times, values));
        // OLS through three points on a line has slope 3.5.
        assert!((p.beta - m.fixed[1]).abs() < (3.5 - m.fixed[1]).abs());
    }

    #[test]
    fn reliability_rules() {
        let mut p = model(0.5).eb_estimate(&Series::new(vec![0.0, 1.0], vec![1.0, 1.5]));
        assert!(!reliability_filter(&p, f64::INFINITY, 3));
        p.n_visits = 3;
        assert!(reliability_filter(&p, p.cond_var_trace, 3));
        assert!(!reliability_filter(&p, p.cond_var_trace * 0.999, 3));
    }

    #[test]
    fn posterior_contracts() {
        let m = model(0.5);
        let p = m.eb_estimate(&Series::new(
            vec![0.0, 1.0, 2.0, 3.0],
            vec![1.0, 1.4, 2.1, 3.3],
        ));
        let diff = m.sigma_u_matrix() - Matrix3::from_fn(|i, j| p.cond_cov[i][j]);
        assert!(diff.symmetric_eigen().eigenvalues.min() > -1e-9);
    }
}
