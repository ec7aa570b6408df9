use super::{
    breslow_fit, cox_loss_and_grad, ranking_loss_and_grad, BaselineHazard, SurvError, SurvivalCurve,
};
use crate::numcore::{
    derive_seed, rng_from_seed, Activation, AdamConfig, AdamState, DenseCheckpoint, DenseNet,
    Standardizer,
};
use serde::{Deserialize, Serialize};

/// Minimum number of events required in the training set.
pub const MIN_TRAIN_EVENTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurvNetConfig {
    pub hidden: Vec<usize>,
    pub dropout: f64,
    /// Hinge margin of the ranking loss.
    pub margin: f64,
    pub rank_weight: f64,
    pub weight_decay: f64,
    pub learning_rate: f64,
    /// One epoch is one full-batch gradient step.
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for SurvNetConfig {
    fn default() -> Self {
        Self {
            hidden: vec![128, 64],
            dropout: 0.1,
            margin: 0.1,
            rank_weight: 0.1,
            weight_decay: 1e-4,
            learning_rate: 1e-3,
            max_epochs: 1000,
            patience: 15,
            seed: 0,
        }
    }
}

/// Feature rows with right-censored outcomes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SurvData {
    pub x: Vec<Vec<f64>>,
    pub times: Vec<f64>,
    pub events: Vec<bool>,
}

impl SurvData {
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            x: idx.iter().map(|&i| self.x[i].clone()).collect(),
            times: idx.iter().map(|&i| self.times[i]).collect(),
            events: idx.iter().map(|&i| self.events[i]).collect(),
        }
    }

    pub fn n_events(&self) -> usize {
        self.events.iter().filter(|e| **e).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Neural proportional-hazards model: a ReLU network maps standardized
/// baseline features to a scalar log-risk.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvNetModel {
    pub config: SurvNetConfig,
    pub scaler: Standardizer,
    pub net: DenseNet,
    pub hazard: Option<BaselineHazard>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvNetCheckpoint {
    pub config: SurvNetConfig,
    pub scaler: Standardizer,
    pub network: DenseCheckpoint,
    pub hazard: Option<BaselineHazard>,
}

impl SurvNetModel {
    pub fn new(input_dim: usize, config: SurvNetConfig) -> Result<Self, SurvError> {
        let net = DenseNet::mlp(
            input_dim,
            &config.hidden,
            1,
            Activation::Relu,
            config.dropout,
            config.seed,
        )?;
        Ok(Self {
            scaler: Standardizer::identity(input_dim),
            net,
            hazard: None,
            config,
        })
    }

    pub fn risk(&self, x: &[f64]) -> Result<f64, SurvError> {
        Ok(self.net.predict(&self.scaler.transform(x))?[0])
    }

    pub fn risks(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>, SurvError> {
        rows.iter().map(|r| self.risk(r)).collect()
    }

    pub fn curve(&self, x: &[f64]) -> Result<SurvivalCurve, SurvError> {
        let hazard = self.hazard.as_ref().ok_or(SurvError::NotFitted)?;
        Ok(hazard.curve(self.risk(x)?))
    }

    /// Combined training objective and its gradient with respect to the flat
    /// parameter vector: mean Cox loss per event, plus weighted ranking loss,
    /// plus L2 penalty on all parameters. Dropout masks are drawn from
    /// `dropout_seed` when given, so repeated calls see identical masks.
    pub fn objective(
        &self,
        data: &SurvData,
        dropout_seed: Option<u64>,
    ) -> Result<(f64, Vec<f64>), SurvError> {
        let n = data.x.len();
        let mut rng = dropout_seed.map(rng_from_seed);
        let mut scores = Vec::with_capacity(n);
        let mut caches = Vec::with_capacity(n);
        for row in &data.x {
            let (out, cache) = self
                .net
                .forward(&self.scaler.transform(row), rng.as_mut())?;
            scores.push(out[0]);
            caches.push(cache);
        }
        let n_events = data.n_events().max(1) as f64;
        let (cox, mut g) = cox_loss_and_grad(&scores, &data.times, &data.events)?;
        g.iter_mut().for_each(|v| *v /= n_events);
        let mut loss = cox / n_events;
        if self.config.rank_weight != 0.0 {
            let (rank, rg) =
                ranking_loss_and_grad(&scores, &data.times, &data.events, self.config.margin)?;
            loss += self.config.rank_weight * rank;
            g.iter_mut()
                .zip(&rg)
                .for_each(|(a, b)| *a += self.config.rank_weight * b);
        }
        let params = self.net.params();
        loss += self.config.weight_decay * params.iter().map(|p| p * p).sum::<f64>();
        let mut total = self.net.zero_grads();
        for (cache, gi) in caches.iter().zip(&g) {
            if *gi != 0.0 {
                let (grads, _) = self.net.backward(cache, &[*gi])?;
                total.add_assign(&grads);
            }
        }
        let mut flat = total.flatten();
        flat.iter_mut()
            .zip(&params)
            .for_each(|(f, p)| *f += 2.0 * self.config.weight_decay * p);
        Ok((loss, flat))
    }

    /// Deterministic (dropout-free) objective value.
    pub fn loss(&self, data: &SurvData) -> Result<f64, SurvError> {
        Ok(self.objective(data, None)?.0)
    }

    /// Full-batch training with early stopping on the validation objective
    /// (on the training objective when no usable validation set is given).
    /// The best parameters are restored and a Breslow hazard is fitted on the
    /// training data.
    pub fn fit(
        train: &SurvData,
        val: Option<&SurvData>,
        config: SurvNetConfig,
    ) -> Result<(Self, Vec<EpochRecord>), SurvError> {
        let found = train.n_events();
        if found < MIN_TRAIN_EVENTS {
            return Err(SurvError::InsufficientData(format!(
                "training set has {found} events, need ≥{MIN_TRAIN_EVENTS}"
            )));
        }
        let input_dim = train.x.first().map_or(0, Vec::len);
        let mut model = Self::new(input_dim, config.clone())?;
        model.scaler = Standardizer::fit(&train.x);
        let val = val.filter(|v| v.n_events() > 0);
        let mut params = model.net.params();
        let mut adam = AdamState::new(
            params.len(),
            AdamConfig {
                learning_rate: config.learning_rate,
                ..AdamConfig::default()
            },
        );
        let mut history = Vec::new();
        let mut best = (f64::INFINITY, params.clone());
        let mut since_best = 0;
        for epoch in 0..config.max_epochs {
            let (train_loss, grad) =
                model.objective(train, Some(derive_seed(config.seed, epoch as u64)))?;
            if !train_loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(SurvError::Diverged { epoch });
            }
            adam.step(&mut params, &grad);
            model.net.set_params(&params)?;
            let monitor = match val {
                Some(v) => model.loss(v)?,
                None => model.loss(train)?,
            };
            if !monitor.is_finite() {
                return Err(SurvError::Diverged { epoch });
            }
            history.push(EpochRecord {
                epoch,
                train_loss,
                val_loss: monitor,
            });
            if monitor < best.0 {
                best = (monitor, params.clone());
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= config.patience {
                    log::info!("survival network stopped at epoch {epoch}");
                    break;
                }
            }
        }
        model.net.set_params(&best.1)?;
        let scores = model.risks(&train.x)?;
        model.hazard = Some(breslow_fit(&scores, &train.times, &train.events)?);
        Ok((model, history))
    }

    pub fn to_checkpoint(&self) -> SurvNetCheckpoint {
        SurvNetCheckpoint {
            config: self.config.clone(),
            scaler: self.scaler.clone(),
            network: self.net.to_checkpoint(),
            hazard: self.hazard.clone(),
        }
    }

    pub fn from_checkpoint(ck: &SurvNetCheckpoint) -> Result<Self, SurvError> {
        Ok(Self {
            config: ck.config.clone(),
            scaler: ck.scaler.clone(),
            net: DenseNet::from_checkpoint(&ck.network)?,
            hazard: ck.hazard.clone(),
        })
    }
}
