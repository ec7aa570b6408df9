//! Biomarker harmonization, longitudinal trajectory modelling and survival
//! prediction for MCI-to-dementia progression, with the evaluation and
//! statistics tooling needed to validate them on synthetic cohorts.

// `!(x > 0.0)` style checks are used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataio;
pub mod evalstats;
pub mod harmonize;
pub mod mixedfx;
pub mod numcore;
pub mod pipeline;
pub mod survnet;
pub mod synthcohort;
pub mod trajnet;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Net(#[from] numcore::NetError),
    #[error(transparent)]
    Stats(#[from] evalstats::StatsError),
    #[error(transparent)]
    Survival(#[from] survnet::SurvError),
    #[error(transparent)]
    MixedModel(#[from] mixedfx::MixedError),
    #[error(transparent)]
    Harmonize(#[from] harmonize::HarmonizeError),
    #[error(transparent)]
    Trajectory(#[from] trajnet::TrajError),
    #[error(transparent)]
    Data(#[from] dataio::DataError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    /// Inputs that are well-formed but unusable (empty cohort, mismatched stage files).
    #[error("invalid input: {0}")]
    Input(String),
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
