use super::HarmonizeError;
use serde::{Deserialize, Serialize};

const GRID_MIN: f64 = -3.0;
const GRID_MAX: f64 = 3.0;
const GRID_STEP: f64 = 0.01;

/// Yeo-Johnson power transform of a single value.
pub fn yeo_johnson_value(y: f64, lambda: f64) -> f64 {
    const EPS: f64 = 1e-12;
    if y >= 0.0 {
        if lambda.abs() < EPS {
            y.ln_1p()
        } else {
            ((y + 1.0).powf(lambda) - 1.0) / lambda
        }
    } else if (lambda - 2.0).abs() < EPS {
        -(-y).ln_1p()
    } else {
        -((1.0 - y).powf(2.0 - lambda) - 1.0) / (2.0 - lambda)
    }
}

/// Profile log-likelihood of λ under a normal model for the transformed data.
fn profile_loglik(values: &[f64], lambda: f64) -> f64 {
    let n = values.len() as f64;
    let t: Vec<f64> = values
        .iter()
        .map(|&y| yeo_johnson_value(y, lambda))
        .collect();
    let mean = t.iter().sum::<f64>() / n;
    let var = t.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if !(var > 0.0) || !var.is_finite() {
        return f64::NEG_INFINITY;
    }
    let jac: f64 = values.iter().map(|&y| y.signum() * y.abs().ln_1p()).sum();
    -0.5 * n * var.ln() + (lambda - 1.0) * jac
}

/// Fitted Yeo-Johnson transform followed by z-scoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YeoJohnson {
    pub lambda: f64,
    pub mean: f64,
    pub sd: f64,
}

impl YeoJohnson {
    /// Chooses λ by maximizing the profile log-likelihood over a 0.01 grid on
    /// [−3, 3], refined by golden-section search around the best grid point.
    pub fn fit(values: &[f64]) -> Result<Self, HarmonizeError> {
        if values.len() < 10 {
            return Err(HarmonizeError::Degenerate(format!(
                "Yeo-Johnson needs ≥10 values, got {}",
                values.len()
            )));
        }
        let first = values[0];
        if values.iter().all(|v| *v == first) {
            return Err(HarmonizeError::Degenerate("zero-variance input".into()));
        }
        let steps = ((GRID_MAX - GRID_MIN) / GRID_STEP).round() as usize;
        let (mut best_l, mut best_ll) = (1.0, f64::NEG_INFINITY);
        for k in 0..=steps {
            let l = GRID_MIN + k as f64 * GRID_STEP;
            let ll = profile_loglik(values, l);
            if ll > best_ll {
                best_ll = ll;
                best_l = l;
            }
        }
        // Golden-section refinement inside the neighbouring grid cells.
        let (mut a, mut b) = (
            (best_l - GRID_STEP).max(GRID_MIN),
            (best_l + GRID_STEP).min(GRID_MAX),
        );
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..40 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if profile_loglik(values, c) > profile_loglik(values, d) {
                b = d;
            } else {
                a = c;
            }
        }
        let refined = 0.5 * (a + b);
        let lambda = if profile_loglik(values, refined) > best_ll {
            refined
        } else {
            best_l
        };
        Self::with_lambda(values, lambda)
    }

    /// Fixed λ with standardization moments estimated from `values`.
    pub fn with_lambda(values: &[f64], lambda: f64) -> Result<Self, HarmonizeError> {
        let t: Vec<f64> = values
            .iter()
            .map(|&y| yeo_johnson_value(y, lambda))
            .collect();
        let n = t.len() as f64;
        let mean = t.iter().sum::<f64>() / n;
        let sd = (t.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        if !(sd > 0.0) || !sd.is_finite() {
            return Err(HarmonizeError::Degenerate(
                "transformed values have zero variance".into(),
            ));
        }
        Ok(Self { lambda, mean, sd })
    }

    /// Transformed value before standardization.
    pub fn transform(&self, y: f64) -> f64 {
        yeo_johnson_value(y, self.lambda)
    }

    /// Transformed and standardized value.
    pub fn apply(&self, y: f64) -> f64 {
        (self.transform(y) - self.mean) / self.sd
    }
}
