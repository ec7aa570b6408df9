use super::{
    classify_atn, impute_biomarkers, AssayMethod, AtnProfile, AtnThresholds, Biomarker,
    CombatModel, FactorEntry, HarmonizationFactors, HarmonizeError, ImputationMode, YeoJohnson,
};
use crate::numcore::{derive_seed, rng_from_seed};
use serde::{Deserialize, Serialize};

/// Bound applied to every standardized biomarker-derived feature.
pub const Z_BOUND: f64 = 10.0;

/// Which two ratio features enter the feature vector.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RatioSet {
    /// p-tau/Aβ42 and t-tau/p-tau.
    #[default]
    TauRatios,
    /// p-tau/Aβ42 and Aβ42/Aβ40 (needs the Aβ40 column).
    AmyloidRatio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarmonizeConfig {
    pub factors: Vec<FactorEntry>,
    pub thresholds: AtnThresholds,
    pub imputation: ImputationMode,
    pub ratios: RatioSet,
    /// Append APOE-ε4 carrier status as an eleventh feature.
    pub include_apoe: bool,
    /// Apply site correction after assay scaling.
    pub combat: bool,
    pub seed: u64,
}

impl Default for HarmonizeConfig {
    fn default() -> Self {
        Self {
            factors: HarmonizationFactors::default().entries(),
            thresholds: AtnThresholds::default(),
            imputation: ImputationMode::Deterministic,
            ratios: RatioSet::TauRatios,
            include_apoe: false,
            combat: true,
            seed: 0,
        }
    }
}

/// Baseline inputs of one subject before harmonization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerInput {
    pub subject_id: String,
    pub site: String,
    /// Raw `[Aβ42, p-tau, t-tau]` in pg/mL.
    pub raw: [Option<f64>; 3],
    pub methods: [AssayMethod; 3],
    pub abeta40: Option<f64>,
    pub age: f64,
    pub female: bool,
    pub education: f64,
    pub mmse: f64,
    pub cdrsb: f64,
    pub apoe4: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonizedSubject {
    pub subject_id: String,
    pub site: String,
    /// Assay-scaled values before site correction.
    pub assay_scaled: [Option<f64>; 3],
    /// Site-corrected and imputed values in pg/mL.
    pub harmonized: [f64; 3],
    pub imputed: [bool; 3],
    pub atn: AtnProfile,
    pub features: Vec<f64>,
}

/// Fitted harmonization pipeline: assay scaling, log-scale site correction,
/// imputation, ATN classification and the transformed feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Harmonizer {
    pub config: HarmonizeConfig,
    pub combat: Vec<Option<CombatModel>>,
    pub complete_cases: Vec<[f64; 3]>,
    /// One transform per biomarker-derived feature (three markers, two ratios).
    pub transforms: Vec<YeoJohnson>,
    pub feature_names: Vec<String>,
}

fn ratio_pair(
    config: &HarmonizeConfig,
    m: &[f64; 3],
    abeta40: Option<f64>,
) -> Result<[f64; 2], HarmonizeError> {
    let first = m[1] / m[0];
    let second = match config.ratios {
        RatioSet::TauRatios => m[2] / m[1],
        RatioSet::AmyloidRatio => {
            let a40 = abeta40.ok_or_else(|| {
                HarmonizeError::Config("Aβ42/40 ratio requested but Aβ40 missing".into())
            })?;
            m[0] / a40
        }
    };
    Ok([first, second])
}

impl Harmonizer {
    pub fn feature_names(config: &HarmonizeConfig) -> Vec<String> {
        let second = match config.ratios {
            RatioSet::TauRatios => "ttau_ptau_ratio",
            RatioSet::AmyloidRatio => "abeta42_40_ratio",
        };
        let mut names: Vec<String> = [
            "abeta42",
            "ptau",
            "ttau",
            "ptau_abeta42_ratio",
            second,
            "age",
            "sex_female",
            "education",
            "mmse",
            "cdrsb",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        if config.include_apoe {
            names.push("apoe4".into());
        }
        names
    }

    fn factors(&self) -> Result<HarmonizationFactors, HarmonizeError> {
        HarmonizationFactors::from_entries(&self.config.factors)
    }

    fn assay_scale(
        factors: &HarmonizationFactors,
        input: &MarkerInput,
    ) -> Result<[Option<f64>; 3], HarmonizeError> {
        let mut out = [None; 3];
        for (k, b) in Biomarker::ALL.into_iter().enumerate() {
            if let Some(v) = input.raw[k] {
                out[k] = Some(factors.apply(v, b, input.methods[k])?);
            }
        }
        Ok(out)
    }

    fn site_correct(&self, scaled: &[Option<f64>; 3], site: &str) -> [Option<f64>; 3] {
        std::array::from_fn(|k| {
            scaled[k].map(|v| match &self.combat[k] {
                Some(model) => model.apply(v.ln(), site, &[]).exp(),
                None => v,
            })
        })
    }

    /// Fits every stage on `inputs` and returns the fitted pipeline.
    pub fn fit(inputs: &[MarkerInput], config: HarmonizeConfig) -> Result<Self, HarmonizeError> {
        let factors = HarmonizationFactors::from_entries(&config.factors)?;
        let scaled: Vec<[Option<f64>; 3]> = inputs
            .iter()
            .map(|i| Self::assay_scale(&factors, i))
            .collect::<Result<_, _>>()?;
        let mut h = Self {
            feature_names: Self::feature_names(&config),
            combat: vec![None, None, None],
            complete_cases: Vec::new(),
            transforms: Vec::new(),
            config,
        };
        if h.config.combat {
            for k in 0..3 {
                let (vals, sites): (Vec<f64>, Vec<String>) = inputs
                    .iter()
                    .zip(&scaled)
                    .filter_map(|(i, s)| s[k].map(|v| (v.ln(), i.site.clone())))
                    .unzip();
                h.combat[k] = Some(CombatModel::fit(&vals, &sites, &[])?);
            }
        }
        let corrected: Vec<[Option<f64>; 3]> = inputs
            .iter()
            .zip(&scaled)
            .map(|(i, s)| h.site_correct(s, &i.site))
            .collect();
        h.complete_cases = corrected
            .iter()
            .filter_map(|c| Some([c[0]?, c[1]?, c[2]?]))
            .collect();
        let mut derived: Vec<[f64; 5]> = Vec::with_capacity(inputs.len());
        for (idx, (input, c)) in inputs.iter().zip(&corrected).enumerate() {
            let m = h.impute(c, idx as u64)?;
            let r = ratio_pair(&h.config, &m, input.abeta40)?;
            derived.push([m[0], m[1], m[2], r[0], r[1]]);
        }
        h.transforms = (0..5)
            .map(|f| YeoJohnson::fit(&derived.iter().map(|d| d[f]).collect::<Vec<_>>()))
            .collect::<Result<_, _>>()?;
        Ok(h)
    }

    fn impute(&self, corrected: &[Option<f64>; 3], index: u64) -> Result<[f64; 3], HarmonizeError> {
        let mut rng = (self.config.imputation == ImputationMode::Stochastic)
            .then(|| rng_from_seed(derive_seed(self.config.seed, index)));
        impute_biomarkers(
            corrected,
            &self.complete_cases,
            &self.config.thresholds,
            self.config.imputation,
            rng.as_mut(),
        )
    }

    /// Applies the fitted pipeline to one subject. `index` selects the
    /// subject's residual stream in stochastic imputation mode.
    pub fn transform(
        &self,
        input: &MarkerInput,
        index: u64,
    ) -> Result<HarmonizedSubject, HarmonizeError> {
        let factors = self.factors()?;
        let scaled = Self::assay_scale(&factors, input)?;
        let corrected = self.site_correct(&scaled, &input.site);
        let m = self.impute(&corrected, index)?;
        let r = ratio_pair(&self.config, &m, input.abeta40)?;
        let derived = [m[0], m[1], m[2], r[0], r[1]];
        let mut features: Vec<f64> = derived
            .iter()
            .zip(&self.transforms)
            .map(|(v, t)| t.apply(*v).clamp(-Z_BOUND, Z_BOUND))
            .collect();
        features.extend([
            input.age,
            input.female as u8 as f64,
            input.education,
            input.mmse,
            input.cdrsb,
        ]);
        if self.config.include_apoe {
            features.push(input.apoe4.map_or(0.0, |a| a as u8 as f64));
        }
        Ok(HarmonizedSubject {
            subject_id: input.subject_id.clone(),
            site: input.site.clone(),
            assay_scaled: scaled,
            harmonized: m,
            imputed: std::array::from_fn(|k| corrected[k].is_none()),
            atn: classify_atn(m[0], m[1], m[2], &self.config.thresholds),
            features,
        })
    }
}
