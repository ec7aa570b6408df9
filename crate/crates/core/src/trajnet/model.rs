use super::loss::{calibration_loss_exact, calibration_surrogate, nll_grad, nll_loss, Z95};
use super::TrajError;
use crate::numcore::{
    derive_seed, rng_from_seed, Activation, AdamConfig, AdamState, AttentionBlock, AttentionCache,
    DenseCheckpoint, DenseNet, ForwardCache, LayerSpec, Rng, Standardizer,
};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Number of head outputs: a mean and a log-variance per trajectory parameter.
pub const HEAD_OUTPUTS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajNetConfig {
    /// Width of the first encoder layer; the encoder is `[w, w/2, w/4]`.
    pub width: usize,
    pub dropout: f64,
    /// L2 penalty on all parameters.
    pub weight_decay: f64,
    /// Weight of the coverage-calibration penalty.
    pub calibration_weight: f64,
    /// Steepness of the sigmoid used in place of the coverage indicator.
    pub calibration_temperature: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Number of stochastic passes used by [`TrajNetModel::mc_predict`].
    pub mc_samples: usize,
    /// Adds the attention input back to its output before the encoder.
    pub attention_residual: bool,
    pub seed: u64,
}

impl Default for TrajNetConfig {
    fn default() -> Self {
        Self {
            width: 128,
            dropout: 0.1,
            weight_decay: 1e-4,
            calibration_weight: 0.1,
            calibration_temperature: 50.0,
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 300,
            patience: 15,
            mc_samples: 50,
            attention_residual: true,
            seed: 0,
        }
    }
}

impl TrajNetConfig {
    pub fn encoder_widths(&self) -> [usize; 3] {
        [self.width, (self.width / 2).max(1), (self.width / 4).max(1)]
    }
}

/// Baseline feature rows paired with `[intercept, slope, acceleration]` targets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajData {
    pub x: Vec<Vec<f64>>,
    pub targets: Vec<[f64; 3]>,
}

impl TrajData {
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            x: idx.iter().map(|&i| self.x[i].clone()).collect(),
            targets: idx.iter().map(|&i| self.targets[i]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajEpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Predictive distribution of one subject's trajectory parameters, in
/// original (de-standardized) units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajPrediction {
    pub means: [f64; 3],
    pub aleatoric: [f64; 3],
    pub epistemic: [f64; 3],
    pub total: [f64; 3],
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

/// Probabilistic trajectory network: feature attention, GELU encoder and a
/// linear head layer emitting a mean and log-variance per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajNetModel {
    pub config: TrajNetConfig,
    pub input_scaler: Standardizer,
    pub target_scaler: Standardizer,
    pub attention: AttentionBlock,
    pub encoder: DenseNet,
    pub heads: DenseNet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajNetCheckpoint {
    pub config: TrajNetConfig,
    pub input_scaler: Standardizer,
    pub target_scaler: Standardizer,
    pub attention: AttentionBlock,
    pub encoder: DenseCheckpoint,
    pub heads: DenseCheckpoint,
}

struct PassCache {
    attention: AttentionCache,
    encoder: ForwardCache,
    heads: ForwardCache,
}

fn split_heads(out: &[f64]) -> ([f64; 3], [f64; 3]) {
    ([out[0], out[1], out[2]], [out[3], out[4], out[5]])
}

impl TrajNetModel {
    pub fn new(input_dim: usize, config: TrajNetConfig) -> Result<Self, TrajError> {
        if input_dim == 0 {
            return Err(TrajError::InvalidParameter(
                "input dimension must be positive".into(),
            ));
        }
        let [w1, w2, w3] = config.encoder_widths();
        let encoder = DenseNet::new(
            &[
                LayerSpec::new(input_dim, w1, Activation::Gelu, config.dropout),
                LayerSpec::new(w1, w2, Activation::Gelu, config.dropout),
                LayerSpec::new(w2, w3, Activation::Gelu, config.dropout),
            ],
            derive_seed(config.seed, 1),
        )?;
        let heads = DenseNet::new(
            &[LayerSpec::new(w3, HEAD_OUTPUTS, Activation::Identity, 0.0)],
            derive_seed(config.seed, 2),
        )?;
        let attention =
            AttentionBlock::init(input_dim, &mut rng_from_seed(derive_seed(config.seed, 0)));
        Ok(Self {
            input_scaler: Standardizer::identity(input_dim),
            target_scaler: Standardizer::identity(3),
            attention,
            encoder,
            heads,
            config,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.attention.dim
    }

    pub fn param_count(&self) -> usize {
        self.attention.param_count() + self.encoder.param_count() + self.heads.param_count()
    }

    /// Attention, encoder, heads — in that order.
    pub fn params(&self) -> Vec<f64> {
        [
            self.attention.params(),
            self.encoder.params(),
            self.heads.params(),
        ]
        .concat()
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<(), TrajError> {
        if flat.len() != self.param_count() {
            return Err(TrajError::Shape(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let a = self.attention.param_count();
        let e = self.encoder.param_count();
        self.attention.set_params(&flat[..a])?;
        self.encoder.set_params(&flat[a..a + e])?;
        self.heads.set_params(&flat[a + e..])?;
        Ok(())
    }

    fn pass(&self, z: &[f64], rng: Option<&mut Rng>) -> Result<(Vec<f64>, PassCache), TrajError> {
        let (mut a, att_cache) = self.attention.forward(z)?;
        if self.config.attention_residual {
            a.iter_mut().zip(z).for_each(|(ai, zi)| *ai += zi);
        }
        let (h, enc_cache) = self.encoder.forward(&a, rng)?;
        let (out, head_cache) = self.heads.forward(&h, None)?;
        Ok((
            out,
            PassCache {
                attention: att_cache,
                encoder: enc_cache,
                heads: head_cache,
            },
        ))
    }

    /// One pass on an already-standardized input, returning the mean and
    /// log-variance of the standardized targets. Dropout is active iff a
    /// generator is supplied.
    pub fn forward_standardized(
        &self,
        z: &[f64],
        rng: Option<&mut Rng>,
    ) -> Result<([f64; 3], [f64; 3]), TrajError> {
        if z.len() != self.input_dim() {
            return Err(TrajError::Shape(format!(
                "expected {} features, got {}",
                self.input_dim(),
                z.len()
            )));
        }
        Ok(split_heads(&self.pass(z, rng)?.0))
    }

    /// One pass on a raw feature row (standardized internally).
    pub fn forward(
        &self,
        x: &[f64],
        rng: Option<&mut Rng>,
    ) -> Result<([f64; 3], [f64; 3]), TrajError> {
        if x.len() != self.input_dim() {
            return Err(TrajError::Shape(format!(
                "expected {} features, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        self.forward_standardized(&self.input_scaler.transform(x), rng)
    }

    /// Training objective on standardized inputs/targets: batch-mean NLL,
    /// plus the L2 penalty, plus the weighted sigmoid-surrogate calibration
    /// penalty. Returns the value and the gradient over [`params`](Self::params).
    pub fn objective(
        &self,
        z: &[Vec<f64>],
        targets: &[[f64; 3]],
        dropout_seed: Option<u64>,
    ) -> Result<(f64, Vec<f64>), TrajError> {
        if z.is_empty() || z.len() != targets.len() {
            return Err(TrajError::Shape(
                "batch must be nonempty with one target per row".into(),
            ));
        }
        let mut rng = dropout_seed.map(rng_from_seed);
        let mut mus = Vec::with_capacity(z.len());
        let mut lvs = Vec::with_capacity(z.len());
        let mut caches = Vec::with_capacity(z.len());
        for row in z {
            let (out, cache) = self.pass(row, rng.as_mut())?;
            let (mu, lv) = split_heads(&out);
            mus.push(mu);
            lvs.push(lv);
            caches.push(cache);
        }
        let (g_mu, g_lv) = nll_grad(&mus, &lvs, targets);
        let mut loss = nll_loss(&mus, &lvs, targets);
        let lambda2 = self.config.calibration_weight;
        let cal = if lambda2 != 0.0 && z.len() >= 2 {
            Some(calibration_surrogate(
                &mus,
                &lvs,
                targets,
                self.config.calibration_temperature,
            ))
        } else {
            None
        };
        let params = self.params();
        loss += self.config.weight_decay * params.iter().map(|p| p * p).sum::<f64>();

        let mut g_att = self.attention.zero_grads();
        let mut g_enc = self.encoder.zero_grads();
        let mut g_head = self.heads.zero_grads();
        if let Some((value, _, _)) = &cal {
            loss += lambda2 * value;
        }
        for (i, cache) in caches.iter().enumerate() {
            let mut g_out = [0.0; HEAD_OUTPUTS];
            for k in 0..3 {
                g_out[k] = g_mu[i][k];
                g_out[k + 3] = g_lv[i][k];
                if let Some((_, cm, cl)) = &cal {
                    g_out[k] += lambda2 * cm[i][k];
                    g_out[k + 3] += lambda2 * cl[i][k];
                }
            }
            let (gh, dh) = self.heads.backward(&cache.heads, &g_out)?;
            g_head.add_assign(&gh);
            let (ge, da) = self.encoder.backward(&cache.encoder, &dh)?;
            g_enc.add_assign(&ge);
            let (ga, _) = self.attention.backward(&cache.attention, &da)?;
            g_att.add_assign(&ga);
        }
        let mut flat = [g_att.flatten(), g_enc.flatten(), g_head.flatten()].concat();
        flat.iter_mut()
            .zip(&params)
            .for_each(|(g, p)| *g += 2.0 * self.config.weight_decay * p);
        Ok((loss, flat))
    }

    fn standardize(&self, data: &TrajData) -> (Vec<Vec<f64>>, Vec<[f64; 3]>) {
        let z = data
            .x
            .iter()
            .map(|r| self.input_scaler.transform(r))
            .collect();
        let t = data
            .targets
            .iter()
            .map(|t| {
                let s = self.target_scaler.transform(t);
                [s[0], s[1], s[2]]
            })
            .collect();
        (z, t)
    }

    /// Deterministic objective on raw data.
    pub fn loss(&self, data: &TrajData) -> Result<f64, TrajError> {
        let (z, t) = self.standardize(data);
        Ok(self.objective(&z, &t, None)?.0)
    }

    /// Mini-batch Adam training with early stopping on the deterministic
    /// validation objective (training objective when no validation set).
    /// Inputs and targets are standardized on the training data; the best
    /// parameters are restored at the end.
    pub fn fit(
        train: &TrajData,
        val: Option<&TrajData>,
        config: TrajNetConfig,
    ) -> Result<(Self, Vec<TrajEpochRecord>), TrajError> {
        if train.is_empty() {
            return Err(TrajError::EmptyData);
        }
        if train.x.len() != train.targets.len() {
            return Err(TrajError::Shape(
                "one target per feature row required".into(),
            ));
        }
        let input_dim = train.x[0].len();
        let mut model = Self::new(input_dim, config.clone())?;
        model.input_scaler = Standardizer::fit(&train.x);
        let target_rows: Vec<Vec<f64>> = train.targets.iter().map(|t| t.to_vec()).collect();
        model.target_scaler = Standardizer::fit(&target_rows);

        let (z_train, t_train) = model.standardize(train);
        let val = val.filter(|v| !v.is_empty()).map(|v| model.standardize(v));
        let mut params = model.params();
        let mut adam = AdamState::new(
            params.len(),
            AdamConfig {
                learning_rate: config.learning_rate,
                ..AdamConfig::default()
            },
        );
        let batch = config.batch_size.max(1);
        let mut order: Vec<usize> = (0..train.len()).collect();
        let mut shuffle_rng = rng_from_seed(derive_seed(config.seed, 3));
        let mut history = Vec::new();
        let mut best = (f64::INFINITY, params.clone());
        let mut since_best = 0;
        let mut step = 0u64;
        for epoch in 0..config.max_epochs {
            order.shuffle(&mut shuffle_rng);
            let mut epoch_loss = 0.0;
            for chunk in order.chunks(batch) {
                let zb: Vec<Vec<f64>> = chunk.iter().map(|&i| z_train[i].clone()).collect();
                let tb: Vec<[f64; 3]> = chunk.iter().map(|&i| t_train[i]).collect();
                let (l, g) =
                    model.objective(&zb, &tb, Some(derive_seed(config.seed ^ 0x5EED, step)))?;
                step += 1;
                if !l.is_finite() || g.iter().any(|v| !v.is_finite()) {
                    return Err(TrajError::Diverged { epoch });
                }
                epoch_loss += l * chunk.len() as f64;
                adam.step(&mut params, &g);
                model.set_params(&params)?;
            }
            let train_loss = epoch_loss / train.len() as f64;
            let monitor = match &val {
                Some((z, t)) => model.objective(z, t, None)?.0,
                None => model.objective(&z_train, &t_train, None)?.0,
            };
            if !monitor.is_finite() {
                return Err(TrajError::Diverged { epoch });
            }
            history.push(TrajEpochRecord {
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
                    log::info!("trajectory network stopped at epoch {epoch}");
                    break;
                }
            }
        }
        model.set_params(&best.1)?;
        Ok((model, history))
    }

    /// Monte Carlo dropout prediction with `samples` stochastic passes, each
    /// seeded from `(seed, pass index)`. Epistemic variance is the spread of
    /// the pass means, aleatoric the mean predicted variance.
    pub fn mc_predict(
        &self,
        x: &[f64],
        samples: usize,
        seed: u64,
    ) -> Result<TrajPrediction, TrajError> {
        if samples < 2 {
            return Err(TrajError::InvalidParameter(format!(
                "need at least 2 MC passes, got {samples}"
            )));
        }
        let z = self.input_scaler.transform(x);
        if z.len() != self.input_dim() {
            return Err(TrajError::Shape(format!(
                "expected {} features, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        let passes: Vec<([f64; 3], [f64; 3])> = (0..samples)
            .into_par_iter()
            .map(|m| {
                let mut rng = rng_from_seed(derive_seed(seed, m as u64));
                self.forward_standardized(&z, Some(&mut rng))
            })
            .collect::<Result<_, _>>()?;
        let n = samples as f64;
        let mut means = [0.0; 3];
        let mut aleatoric = [0.0; 3];
        let mut epistemic = [0.0; 3];
        let mut total = [0.0; 3];
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for k in 0..3 {
            let scale = self.target_scaler.sd[k];
            let mean_z = passes.iter().map(|p| p.0[k]).sum::<f64>() / n;
            let epi_z = if passes.iter().all(|p| p.0[k] == passes[0].0[k]) {
                0.0
            } else {
                passes
                    .iter()
                    .map(|p| (p.0[k] - mean_z).powi(2))
                    .sum::<f64>()
                    / n
            };
            let ale_z = passes.iter().map(|p| p.1[k].exp()).sum::<f64>() / n;
            means[k] = self.target_scaler.mean[k] + scale * mean_z;
            aleatoric[k] = ale_z * scale * scale;
            epistemic[k] = epi_z * scale * scale;
            total[k] = aleatoric[k] + epistemic[k];
            let half = Z95 * total[k].sqrt();
            lo[k] = means[k] - half;
            hi[k] = means[k] + half;
        }
        Ok(TrajPrediction {
            means,
            aleatoric,
            epistemic,
            total,
            lo,
            hi,
        })
    }

    /// Per-parameter `|coverage − 0.95|` of the exact-indicator calibration
    /// penalty on raw data, using deterministic predictions.
    pub fn calibration_error(&self, data: &TrajData) -> Result<[f64; 3], TrajError> {
        let (z, t) = self.standardize(data);
        let mut mus = Vec::with_capacity(z.len());
        let mut sds = Vec::with_capacity(z.len());
        for row in &z {
            let (mu, lv) = self.forward_standardized(row, None)?;
            mus.push(mu);
            sds.push(lv.map(|v| (0.5 * v).exp()));
        }
        Ok(calibration_loss_exact(&mus, &sds, &t))
    }

    pub fn to_checkpoint(&self) -> TrajNetCheckpoint {
        TrajNetCheckpoint {
            config: self.config.clone(),
            input_scaler: self.input_scaler.clone(),
            target_scaler: self.target_scaler.clone(),
            attention: self.attention.clone(),
            encoder: self.encoder.to_checkpoint(),
            heads: self.heads.to_checkpoint(),
        }
    }

    pub fn from_checkpoint(ck: &TrajNetCheckpoint) -> Result<Self, TrajError> {
        let heads = DenseNet::from_checkpoint(&ck.heads)?;
        if heads.output_dim() != HEAD_OUTPUTS {
            return Err(TrajError::Shape(format!(
                "expected {HEAD_OUTPUTS} head outputs"
            )));
        }
        let encoder = DenseNet::from_checkpoint(&ck.encoder)?;
        if encoder.input_dim() != ck.attention.dim || encoder.output_dim() != heads.input_dim() {
            return Err(TrajError::Shape(
                "checkpoint components do not chain".into(),
            ));
        }
        Ok(Self {
            config: ck.config.clone(),
            input_scaler: ck.input_scaler.clone(),
            target_scaler: ck.target_scaler.clone(),
            attention: ck.attention.clone(),
            encoder,
            heads,
        })
    }
}
