//! Probabilistic trajectory-parameter network: predicts the intercept, slope
//! and acceleration of a subject's CDR-SB course from baseline features,
//! with heteroscedastic (aleatoric) variances and Monte Carlo dropout
//! (epistemic) uncertainty.

mod loss;
mod model;

pub use loss::{
    calibration_loss_exact, calibration_surrogate, nll_grad, nll_loss, NOMINAL_COVERAGE, Z95,
};
pub use model::{
    TrajData, TrajEpochRecord, TrajNetCheckpoint, TrajNetConfig, TrajNetModel, TrajPrediction,
    HEAD_OUTPUTS,
};

use crate::numcore::NetError;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TrajError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("training data is empty")]
    EmptyData,
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error(transparent)]
    Net(#[from] NetError),
}
