use super::HarmonizeError;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteParams {
    pub location: f64,
    pub scale: f64,
    pub n: usize,
}

/// Location/scale batch correction for one variable with empirical-Bayes
/// shrinkage of per-site moments toward the pooled ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombatModel {
    pub sites: BTreeMap<String, SiteParams>,
    pub coefficients: Vec<f64>,
    pub pooled_mean: f64,
    pub pooled_sd: f64,
}

fn covariate_dot(coefs: &[f64], x: &[f64]) -> f64 {
    coefs.iter().zip(x).map(|(b, v)| b * v).sum()
}

impl CombatModel {
    /// Fits site parameters.
    ///
    /// Covariate effects are estimated jointly with site indicators by least
    /// squares. Site means are shrunk toward the pooled mean with a normal
    /// prior whose variance is the method-of-moments between-site variance;
    /// site variances are shrunk with an inverse-gamma prior matched to the
    /// mean and variance of the per-site variances. With fewer than two (for
    /// locations) or three (for scales) sites the raw site moments are used.
    pub fn fit(
        values: &[f64],
        sites: &[String],
        covariates: &[Vec<f64>],
    ) -> Result<Self, HarmonizeError> {
        let n = values.len();
        if sites.len() != n || (!covariates.is_empty() && covariates.len() != n) {
            return Err(HarmonizeError::Invalid(
                "ComBat inputs differ in length".into(),
            ));
        }
        let p = covariates.first().map_or(0, Vec::len);
        let mut by_site: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, s) in sites.iter().enumerate() {
            by_site.entry(s.as_str()).or_default().push(i);
        }
        if let Some((s, idx)) = by_site.iter().find(|(_, idx)| idx.len() < 2) {
            return Err(HarmonizeError::Invalid(format!(
                "site {s} has {} observation(s), need ≥2",
                idx.len()
            )));
        }
        let k = by_site.len();
        if n <= p + k {
            return Err(HarmonizeError::Invalid(format!(
                "n={n} too small for {p} covariates and {k} sites"
            )));
        }

        let coefficients = if p == 0 {
            Vec::new()
        } else {
            let site_index: BTreeMap<&str, usize> =
                by_site.keys().enumerate().map(|(j, s)| (*s, j)).collect();
            let design = DMatrix::from_fn(n, k + p, |i, c| {
                if c < k {
                    (site_index[sites[i].as_str()] == c) as u8 as f64
                } else {
                    covariates[i][c - k]
                }
            });
            let y = DVector::from_column_slice(values);
            let xtx = design.transpose() * &design;
            let sv = xtx.singular_values();
            if sv.min() <= 1e-10 * sv.max() {
                return Err(HarmonizeError::Rank);
            }
            let ch = xtx.cholesky().ok_or(HarmonizeError::Rank)?;
            let beta = ch.solve(&(design.transpose() * y));
            if beta.iter().any(|b| !b.is_finite()) {
                return Err(HarmonizeError::Rank);
            }
            beta.iter().skip(k).copied().collect()
        };

        let resid: Vec<f64> = (0..n)
            .map(|i| {
                values[i]
                    - covariates
                        .get(i)
                        .map_or(0.0, |x| covariate_dot(&coefficients, x))
            })
            .collect();
        let moments: Vec<(f64, f64, usize)> = by_site
            .values()
            .map(|idx| {
                let m = idx.iter().map(|&i| resid[i]).sum::<f64>() / idx.len() as f64;
                let v = idx.iter().map(|&i| (resid[i] - m).powi(2)).sum::<f64>()
                    / (idx.len() - 1) as f64;
                (m, v, idx.len())
            })
            .collect();
        let pooled_mean = resid.iter().sum::<f64>() / n as f64;
        let pooled_var = moments
            .iter()
            .map(|(_, v, nj)| (*nj as f64 - 1.0) * v)
            .sum::<f64>()
            / (n - k) as f64;
        if !(pooled_var > 0.0) {
            return Err(HarmonizeError::Degenerate(
                "pooled within-site variance is zero".into(),
            ));
        }

        // Location prior: between-site variance of means net of sampling noise.
        let tau2 = if k >= 2 {
            let mbar = moments.iter().map(|m| m.0).sum::<f64>() / k as f64;
            let between =
                moments.iter().map(|m| (m.0 - mbar).powi(2)).sum::<f64>() / (k - 1) as f64;
            let noise = moments.iter().map(|(_, v, nj)| v / *nj as f64).sum::<f64>() / k as f64;
            Some((between - noise).max(0.0))
        } else {
            None
        };
        // Scale prior: inverse-gamma matched to the spread of site variances.
        let inv_gamma = if k >= 3 {
            let vbar = moments.iter().map(|m| m.1).sum::<f64>() / k as f64;
            let vvar = moments.iter().map(|m| (m.1 - vbar).powi(2)).sum::<f64>() / (k - 1) as f64;
            (vvar > 0.0).then(|| {
                let a = vbar * vbar / vvar + 2.0;
                (a, vbar * (a - 1.0))
            })
        } else {
            None
        };

        let sites_out = by_site
            .keys()
            .zip(&moments)
            .map(|(s, &(m, v, nj))| {
                let location = match tau2 {
                    Some(t2) if t2 > 0.0 || v > 0.0 => {
                        let w = nj as f64 * t2;
                        (w * m + v * pooled_mean) / (w + v)
                    }
                    _ => m,
                };
                let var = match inv_gamma {
                    Some((a, b)) => {
                        let ss = (nj as f64 - 1.0) * v + nj as f64 * (m - location).powi(2);
                        (b + 0.5 * ss) / (a + 0.5 * nj as f64 - 1.0)
                    }
                    None => v,
                };
                (
                    s.to_string(),
                    SiteParams {
                        location,
                        scale: var.max(f64::MIN_POSITIVE).sqrt(),
                        n: nj,
                    },
                )
            })
            .collect();
        Ok(Self {
            sites: sites_out,
            coefficients,
            pooled_mean,
            pooled_sd: pooled_var.sqrt(),
        })
    }

    /// Maps one value onto the pooled scale. Unknown sites use the pooled
    /// parameters.
    pub fn apply(&self, value: f64, site: &str, covariates: &[f64]) -> f64 {
        let (loc, scale) = match self.sites.get(site) {
            Some(s) => (s.location, s.scale),
            None => {
                log::warn!("ComBat: unknown site {site}, using pooled parameters");
                (self.pooled_mean, self.pooled_sd)
            }
        };
        (value - loc - covariate_dot(&self.coefficients, covariates)) / scale * self.pooled_sd
            + self.pooled_mean
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_site_model() -> CombatModel {
        let mut sites = BTreeMap::new();
        sites.insert(
            "s".to_string(),
            SiteParams {
                location: 2.0,
                scale: 2.0,
                n: 10,
            },
        );
        CombatModel {
            sites,
            coefficients: vec![],
            pooled_mean: 0.0,
            pooled_sd: 1.0,
        }
    }

    #[test]
    fn hand_arithmetic() {
        let m = single_site_model();
        assert_eq!(m.apply(4.0, "s", &[]), 1.0);
        assert_eq!(m.apply(2.0, "s", &[]), 0.0);
    }

    #[test]
    fn single_site_uses_raw_moments() {
        let values = [1.0, 2.0, 4.0, 7.0];
        let sites = vec!["a".to_string(); 4];
        let m = CombatModel::fit(&values, &sites, &[]).unwrap();
        let s = &m.sites["a"];
        assert!((s.location - 3.5).abs() < 1e-12);
        assert!((s.scale - 7f64.sqrt()).abs() < 1e-12);
        for v in values {
            assert!((m.apply(v, "a", &[]) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn unknown_site_falls_back_to_pooled() {
        let m = single_site_model();
        assert_eq!(m.apply(3.0, "zzz", &[]), 3.0);
    }

    #[test]
    fn collinear_covariates_rank_error() {
        let values: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let sites = vec!["a".to_string(); 10];
        let cov: Vec<Vec<f64>> = (0..10).map(|_| vec![1.0]).collect();
        assert!(matches!(
            CombatModel::fit(&values, &sites, &cov),
            Err(HarmonizeError::Rank)
        ));
    }
}
