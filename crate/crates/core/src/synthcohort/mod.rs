//! Synthetic cohorts in the ingestion CSV schemas, with the generating truth
//! (trajectory coefficients, log-risk, uncensored event time, site and
//! pre-shift biomarkers) kept alongside for oracle evaluation.

mod generate;
mod oracle;

pub use generate::{generate, read_truth, write_cohort, Cohort, CohortFiles, SubjectTruth};
pub use oracle::{oracle_metrics, OraclePrediction};

use serde::{Deserialize, Serialize};

/// Serializes `+∞` as JSON `null` (JSON has no infinities) and back.
pub(crate) mod nonfinite {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// How the true log-risk depends on the biomarkers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HazardLink {
    /// `0.8·z(p-tau) + 0.8·z(1/Aβ42)`.
    Linear,
    /// Damped main effects plus a t-tau/p-tau (neurodegeneration) effect that
    /// raises risk when amyloid-positive and lowers it when amyloid-negative;
    /// not representable by a linear model on the harmonized features.
    #[default]
    Nonlinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub n_subjects: usize,
    pub n_centers: usize,
    /// Share of subjects with MCI (rather than normal cognition) at baseline.
    pub mci_fraction: f64,
    /// SD of the per-site log-scale shift of each biomarker.
    pub site_shift_sd: [f64; 3],
    /// Population intercept, slope and acceleration of CDR-SB.
    pub fixed_effects: [f64; 3],
    /// Covariance of the subject-level random effects.
    pub random_effect_cov: [[f64; 3]; 3],
    pub residual_variance: f64,
    /// Shift of each trajectory coefficient per unit of true log-risk.
    pub risk_loadings: [f64; 3],
    pub hazard_link: HazardLink,
    /// Exponential baseline hazard, per year.
    pub baseline_hazard: f64,
    /// Exponential censoring rate, per year.
    pub censoring_rate: f64,
    pub visit_interval_mean: f64,
    pub visit_interval_sd: f64,
    /// Administrative end of follow-up, years (may be infinite).
    #[serde(with = "nonfinite")]
    pub max_follow_up: f64,
    /// Probability that each biomarker value is missing.
    pub missing_rate: [f64; 3],
    /// Probability of ELISA, Luminex and other assays.
    pub assay_mix: [f64; 3],
    /// Share of subjects whose only CSF draw falls outside the alignment window.
    pub misaligned_rate: f64,
    /// Share of subjects with a second, later CSF draw.
    pub repeat_csf_rate: f64,
    pub missing_education_rate: f64,
    /// Round CDR-SB to the 0.5 grid.
    pub round_cdrsb: bool,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_subjects: 2000,
            n_centers: 12,
            mci_fraction: 0.85,
            site_shift_sd: [0.15; 3],
            fixed_effects: [1.5, 0.35, 0.03],
            random_effect_cov: [[0.64, 0.0, 0.0], [0.0, 0.0625, 0.0], [0.0, 0.0, 0.0009]],
            residual_variance: 0.25,
            risk_loadings: [0.3, 0.2, 0.01],
            hazard_link: HazardLink::Nonlinear,
            baseline_hazard: 0.013,
            censoring_rate: 0.08,
            visit_interval_mean: 1.0,
            visit_interval_sd: 0.1,
            max_follow_up: 8.0,
            missing_rate: [0.05; 3],
            assay_mix: [0.6, 0.3, 0.1],
            misaligned_rate: 0.03,
            repeat_csf_rate: 0.08,
            missing_education_rate: 0.01,
            round_cdrsb: true,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), String> {
        let rates = [
            self.baseline_hazard,
            self.censoring_rate,
            self.residual_variance,
            self.visit_interval_sd,
            self.misaligned_rate,
            self.repeat_csf_rate,
            self.missing_education_rate,
        ];
        if rates.iter().any(|r| !(*r >= 0.0))
            || self.missing_rate.iter().any(|r| !(0.0..=1.0).contains(r))
        {
            return Err("rates must be non-negative (and missingness at most 1)".into());
        }
        if (self.assay_mix.iter().sum::<f64>() - 1.0).abs() > 1e-9
            || self.assay_mix.iter().any(|p| *p < 0.0)
        {
            return Err("assay mix proportions must be non-negative and sum to 1".into());
        }
        if !(0.0..=1.0).contains(&self.mci_fraction) {
            return Err("mci_fraction must lie in [0, 1]".into());
        }
        if self.n_centers == 0 {
            return Err("need at least one center".into());
        }
        if !(self.visit_interval_mean > 0.0) || !(self.max_follow_up > 0.0) {
            return Err("visit interval and follow-up must be positive".into());
        }
        Ok(())
    }
}
