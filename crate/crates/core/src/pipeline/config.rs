use crate::dataio::CohortFilter;
use crate::harmonize::HarmonizeConfig;
use crate::mixedfx::RemlOptions;
use crate::numcore::derive_seed;
use crate::survnet::SurvNetConfig;
use crate::synthcohort::GeneratorConfig;
use crate::trajnet::TrajNetConfig;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Train / validation / test fractions.
pub const SPLIT_DEFAULT: [f64; 3] = [0.722, 0.128, 0.150];

/// Fully resolved settings of a pipeline run. Stage-level seeds are derived
/// from the single run seed by [`RunConfig::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 uses every available core.
    pub jobs: usize,
    pub cohort_filter: CohortFilter,
    pub split: [f64; 3],
    /// Prediction horizons in years.
    pub horizons: Vec<f64>,
    pub min_center_n: usize,
    pub folds: usize,
    pub repeats: usize,
    pub bootstrap_resamples: usize,
    pub permutations: usize,
    /// Quantile of the training conditional-variance traces used as the
    /// reliability threshold.
    pub reliability_quantile: f64,
    pub min_visits: usize,
    pub generator: GeneratorConfig,
    pub harmonize: HarmonizeConfig,
    pub reml: RemlOptions,
    pub trajectory: TrajNetConfig,
    pub survival: SurvNetConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            jobs: 0,
            cohort_filter: CohortFilter::MciOnly,
            split: SPLIT_DEFAULT,
            horizons: vec![2.0, 3.0, 5.0],
            min_center_n: 20,
            folds: 5,
            repeats: 5,
            bootstrap_resamples: 2000,
            permutations: 10_000,
            reliability_quantile: 0.75,
            min_visits: 3,
            generator: GeneratorConfig::default(),
            harmonize: HarmonizeConfig::default(),
            reml: RemlOptions::default(),
            trajectory: TrajNetConfig::default(),
            survival: SurvNetConfig::default(),
        }
    }
}

/// Stage indices for seed derivation.
pub(crate) mod stream {
    pub const GENERATE: u64 = 1;
    pub const HARMONIZE: u64 = 2;
    pub const TRAJECTORY: u64 = 3;
    pub const SURVIVAL: u64 = 4;
    pub const SPLIT: u64 = 5;
    pub const PREDICT: u64 = 6;
    pub const CV: u64 = 7;
    pub const LOCO: u64 = 8;
    pub const FAIRNESS: u64 = 9;
    pub const BOOTSTRAP: u64 = 10;
    pub const PERMUTATION: u64 = 11;
}

impl RunConfig {
    /// Sets every stage seed from the run seed so that all randomness
    /// flows from one number.
    pub fn resolve(mut self) -> Self {
        self.generator.seed = derive_seed(self.seed, stream::GENERATE);
        self.harmonize.seed = derive_seed(self.seed, stream::HARMONIZE);
        self.trajectory.seed = derive_seed(self.seed, stream::TRAJECTORY);
        self.survival.seed = derive_seed(self.seed, stream::SURVIVAL);
        self
    }

    pub fn stage_seed(&self, stage: u64) -> u64 {
        derive_seed(self.seed, stage)
    }

    /// Sets the encoder width of both networks: `[w, w/2, w/4]` for the
    /// trajectory network and `[w, w/2]` for the survival network.
    pub fn set_width(&mut self, width: usize) {
        self.trajectory.width = width;
        self.survival.hidden = vec![width, width / 2];
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.split.iter().any(|f| !(*f >= 0.0))
            || (self.split.iter().sum::<f64>() - 1.0).abs() > 1e-6
        {
            return bad("split fractions must be non-negative and sum to 1");
        }
        if self.split[0] <= 0.0 || self.split[2] <= 0.0 {
            return bad("train and test fractions must be positive");
        }
        if self.horizons.is_empty() || self.horizons.iter().any(|h| !(*h > 0.0)) {
            return bad("horizons must be positive");
        }
        if self.folds < 2 || self.repeats == 0 {
            return bad("need at least 2 folds and 1 repeat");
        }
        if !(0.0..=1.0).contains(&self.reliability_quantile) {
            return bad("reliability quantile must lie in [0, 1]");
        }
        if self.trajectory.width < 4 || self.survival.hidden.contains(&0) {
            return bad("network widths must be at least 4 (trajectory) and positive (survival)");
        }
        if self.trajectory.mc_samples < 2 {
            return bad("need at least 2 Monte Carlo passes");
        }
        if !(0.0..1.0).contains(&self.trajectory.dropout)
            || !(0.0..1.0).contains(&self.survival.dropout)
        {
            return bad("dropout must lie in [0, 1)");
        }
        self.generator.validate().map_err(Error::Config)
    }
}
