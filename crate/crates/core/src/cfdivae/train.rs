use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelError, ModelParams, Normalization, Result};
use crate::autodiff::{Adam, AdamConfig};
use crate::dataset::Dataset;
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Per-epoch learning-rate decay, `lr / (1 + lrd·epoch)`.
    pub lrd: f64,
    /// Decoupled weight decay.
    pub wd: f64,
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 256,
            lr: 1e-3,
            lrd: 0.01,
            wd: 1e-4,
            mc_samples: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            weight_decay: self.wd,
            lr_decay: self.lrd,
            ..AdamConfig::default()
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.batch_size == 0 || self.batch_size > n {
            return Err(ModelError::InvalidConfig(format!(
                "batch_size must lie in 1..={n}, got {}",
                self.batch_size
            )));
        }
        if self.mc_samples == 0 {
            return Err(ModelError::InvalidConfig("mc_samples must be positive".into()));
        }
        self.adam().validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub elbo: f64,
    pub reconstruction: f64,
    pub kl: f64,
}

/// Row-weighted epoch means of the ELBO and its two terms.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

/// Maximizes the ELBO by shuffled mini-batch Adam. Only the `t`, `w` and `x`
/// columns of `data` are read.
pub fn train(data: &Dataset, model: ModelConfig, cfg: &TrainConfig) -> Result<(ModelParams, TrainHistory)> {
    cfg.validate(data.len())?;
    let mut params = ModelParams::init(model, Normalization::fit(data), derive_seed(cfg.seed, &[1]))?;
    let full = params.batch(data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[2]));
    let mut opt = Adam::new(cfg.adam(), params.store())?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = TrainHistory::default();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut elbo, mut rec, mut kl) = (0.0, 0.0, 0.0);
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch = full.select(idx);
            let terms = params.elbo(&batch, &mut rng, cfg.mc_samples)?;
            if !terms.elbo.is_finite() {
                return Err(ModelError::NonFinite { epoch, batch: b });
            }
            opt.step(params.store_mut(), epoch)?;
            let w = idx.len() as f64;
            elbo += w * terms.elbo;
            rec += w * terms.reconstruction;
            kl += w * terms.kl;
        }
        let n = data.len() as f64;
        history.epochs.push(EpochStats {
            elbo: elbo / n,
            reconstruction: rec / n,
            kl: kl / n,
        });
    }
    Ok((params, history))
}

/// Posterior means `E_q[Z | T, W, X]`, one column per latent dimension.
pub fn infer_representation(params: &ModelParams, data: &Dataset) -> Result<Vec<Vec<f64>>> {
    params.posterior_mean(&params.batch(data)?)
}
