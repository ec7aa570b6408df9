//! Proportional-hazards survival modelling: partial likelihood and ranking
//! losses, the Breslow baseline hazard, individual survival curves, a neural
//! risk model, a linear Cox baseline and calibration assessment.

mod hazard;
mod ici;
mod linear;
mod loss;
mod model;

pub use hazard::{breslow_fit, BaselineHazard, SurvivalCurve, REPORT_HORIZONS};
pub use ici::ici;
pub use linear::{linear_coxph_fit, LinearCox};
pub use loss::{cox_loss_and_grad, cox_partial_likelihood, ranking_loss, ranking_loss_and_grad};
pub use model::{
    EpochRecord, SurvData, SurvNetCheckpoint, SurvNetConfig, SurvNetModel, MIN_TRAIN_EVENTS,
};

use crate::numcore::NetError;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SurvError {
    #[error("partial likelihood undefined: no events")]
    NoEvents,
    #[error("input shape error: {0}")]
    Shape(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("model has no fitted baseline hazard")]
    NotFitted,
    #[error(transparent)]
    Net(#[from] NetError),
}
