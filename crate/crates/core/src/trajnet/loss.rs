/// Two-sided 95% normal quantile used for intervals and the calibration band.
pub const Z95: f64 = 1.959_964;
/// Nominal coverage targeted by the calibration penalty.
pub const NOMINAL_COVERAGE: f64 = 0.95;

/// Heteroscedastic Gaussian negative log-likelihood (without the constant),
/// summed over parameters and averaged over the batch.
pub fn nll_loss(mu: &[[f64; 3]], logvar: &[[f64; 3]], target: &[[f64; 3]]) -> f64 {
    let b = mu.len() as f64;
    mu.iter()
        .zip(logvar)
        .zip(target)
        .map(|((m, lv), t)| {
            (0..3)
                .map(|k| (t[k] - m[k]).powi(2) / (2.0 * lv[k].exp()) + 0.5 * lv[k])
                .sum::<f64>()
        })
        .sum::<f64>()
        / b
}

/// Per-parameter `|coverage − 0.95|` of the `μ ± z·σ` band, counting residuals
/// exactly (inclusive boundary).
pub fn calibration_loss_exact(mu: &[[f64; 3]], sd: &[[f64; 3]], target: &[[f64; 3]]) -> [f64; 3] {
    let b = mu.len() as f64;
    std::array::from_fn(|k| {
        let inside = (0..mu.len())
            .filter(|&i| (target[i][k] - mu[i][k]).abs() <= Z95 * sd[i][k])
            .count() as f64;
        (inside / b - NOMINAL_COVERAGE).abs()
    })
}

/// Smooth calibration penalty: the coverage indicator is replaced by
/// `sigmoid(temperature · (z·σ − |r|))`. Returns the summed penalty and its
/// gradients with respect to each mean and log-variance.
pub fn calibration_surrogate(
    mu: &[[f64; 3]],
    logvar: &[[f64; 3]],
    target: &[[f64; 3]],
    temperature: f64,
) -> (f64, Vec<[f64; 3]>, Vec<[f64; 3]>) {
    let b = mu.len() as f64;
    let n = mu.len();
    let mut g_mu = vec![[0.0; 3]; n];
    let mut g_lv = vec![[0.0; 3]; n];
    let mut total = 0.0;
    for k in 0..3 {
        let mut cov = 0.0;
        let mut parts = Vec::with_capacity(n);
        for i in 0..n {
            let r = target[i][k] - mu[i][k];
            let sd = (0.5 * logvar[i][k]).exp();
            let u = temperature * (Z95 * sd - r.abs());
            let s = 1.0 / (1.0 + (-u).exp());
            cov += s / b;
            parts.push((s * (1.0 - s), r.signum(), sd));
        }
        let gap = cov - NOMINAL_COVERAGE;
        total += gap.abs();
        let outer = if gap > 0.0 {
            1.0
        } else if gap < 0.0 {
            -1.0
        } else {
            0.0
        };
        for (i, (ds, sign, sd)) in parts.into_iter().enumerate() {
            let common = outer * ds * temperature / b;
            // d|r|/dμ = −sign(r); dσ/dlogvar = σ/2
            g_mu[i][k] = common * sign;
            g_lv[i][k] = common * Z95 * sd * 0.5;
        }
    }
    (total, g_mu, g_lv)
}

/// Gradient of [`nll_loss`] with respect to each mean and log-variance.
pub fn nll_grad(
    mu: &[[f64; 3]],
    logvar: &[[f64; 3]],
    target: &[[f64; 3]],
) -> (Vec<[f64; 3]>, Vec<[f64; 3]>) {
    let b = mu.len() as f64;
    let mut g_mu = vec![[0.0; 3]; mu.len()];
    let mut g_lv = vec![[0.0; 3]; mu.len()];
    for i in 0..mu.len() {
        for k in 0..3 {
            let r = target[i][k] - mu[i][k];
            let inv = (-logvar[i][k]).exp();
            g_mu[i][k] = -r * inv / b;
            g_lv[i][k] = (0.5 - 0.5 * r * r * inv) / b;
        }
    }
    (g_mu, g_lv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nll_reference_values() {
        assert_eq!(
            nll_loss(&[[1.0, 2.0, 3.0]], &[[0.0; 3]], &[[1.0, 2.0, 3.0]]),
            0.0
        );
        assert_eq!(nll_loss(&[[0.0; 3]], &[[0.0; 3]], &[[1.0, 0.0, 0.0]]), 0.5);
    }

    #[test]
    fn exact_calibration_cases() {
        let mu = vec![[0.0; 3]; 20];
        let sd = vec![[1.0; 3]; 20];
        let c = calibration_loss_exact(&mu, &sd, &mu);
        for v in c {
            assert!((v - 0.05).abs() < 1e-12);
        }
        // 19 of 20 inside the band → exactly 95%.
        let mut t = vec![[0.0; 3]; 20];
        t[7] = [3.0, -3.0, 2.5];
        let c = calibration_loss_exact(&mu, &sd, &t);
        for v in c {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn surrogate_gradient_matches_finite_differences() {
        let mu = vec![[0.1, -0.2, 0.3], [0.5, 0.0, -0.4], [-0.3, 0.2, 0.1]];
        let lv = vec![[-0.5, 0.2, 0.0], [0.1, -0.3, 0.4], [0.0, 0.0, -1.0]];
        let t = vec![[1.2, -0.1, 0.5], [0.4, 1.9, -0.2], [-2.5, 0.25, 0.0]];
        let (_, gm, gl) = calibration_surrogate(&mu, &lv, &t, 5.0);
        let h = 1e-6;
        for i in 0..3 {
            for k in 0..3 {
                let mut up = mu.clone();
                up[i][k] += h;
                let mut dn = mu.clone();
                dn[i][k] -= h;
                let fd = (calibration_surrogate(&up, &lv, &t, 5.0).0
                    - calibration_surrogate(&dn, &lv, &t, 5.0).0)
                    / (2.0 * h);
                assert!((fd - gm[i][k]).abs() < 1e-6);
                let mut up = lv.clone();
                up[i][k] += h;
                let mut dn = lv.clone();
                dn[i][k] -= h;
                let fd = (calibration_surrogate(&mu, &up, &t, 5.0).0
                    - calibration_surrogate(&mu, &dn, &t, 5.0).0)
                    / (2.0 * h);
                assert!((fd - gl[i][k]).abs() < 1e-6);
            }
        }
    }
}
