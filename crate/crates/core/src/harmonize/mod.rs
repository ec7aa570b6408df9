//! Biomarker harmonization: cross-assay scaling, site (batch) correction,
//! imputation of missing markers, power transformation, ATN classification
//! and assembly of the baseline feature vector.

mod atn;
mod combat;
mod factors;
mod features;
mod impute;
mod yeojohnson;

pub use atn::{classify_atn, AtnProfile, AtnThresholds};
pub use combat::{CombatModel, SiteParams};
pub use factors::{FactorEntry, HarmonizationFactors};
pub use features::{
    HarmonizeConfig, HarmonizedSubject, Harmonizer, MarkerInput, RatioSet, Z_BOUND,
};
pub use impute::{impute_biomarkers, ImputationMode, Partial};
pub use yeojohnson::{yeo_johnson_value, YeoJohnson};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarmonizeError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("covariate matrix is rank deficient")]
    Rank,
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("imputation failed: {0}")]
    Imputation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Biomarker {
    Abeta42,
    Ptau,
    Ttau,
}

impl Biomarker {
    pub const ALL: [Biomarker; 3] = [Biomarker::Abeta42, Biomarker::Ptau, Biomarker::Ttau];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssayMethod {
    Elisa,
    Luminex,
    Other,
}

impl AssayMethod {
    pub const ALL: [AssayMethod; 3] =
        [AssayMethod::Elisa, AssayMethod::Luminex, AssayMethod::Other];

    /// Method code used in the CSF method columns (1 ELISA, 2 Luminex, 8 other).
    pub fn from_code(code: i64) -> Option<Self> {
        match code {
            1 => Some(Self::Elisa),
            2 => Some(Self::Luminex),
            8 => Some(Self::Other),
            _ => None,
        }
    }

    pub fn code(self) -> i64 {
        match self {
            Self::Elisa => 1,
            Self::Luminex => 2,
            Self::Other => 8,
        }
    }
}
