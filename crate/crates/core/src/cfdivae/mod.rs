//! Identifiable VAE for a latent mediator observed only through proxies.
//!
//! Generative model: `Z ~ p(Z | T, W)`, `X ~ N(f_mu(Z), f_var(Z))`.
//! Inference model: `q(Z | T, W, X)`. All three maps are MLPs producing a
//! mean and a log-variance; variances are `max(exp(logvar), 1e-4)`.
//!
//! The ablation variants drop conditioning inputs from both the prior and the
//! encoder: `t-only` keeps T, `w-only` keeps W and `unconditional` keeps
//! neither, in which case the prior network sees an empty input and learns a
//! constant Gaussian.

mod model;
mod train;

pub use model::{Batch, ElboTerms, ModelParams, Normalization};
pub use train::{infer_representation, train, EpochStats, TrainConfig, TrainHistory};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::AutodiffError;

pub const VARIANCE_FLOOR: f64 = 1e-4;
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("input has {got} {what} columns, model expects {expected}")]
    RoleMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorMode {
    LearnedConditional,
    FixedStandardNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Full,
    TOnly,
    WOnly,
    Unconditional,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Full, Variant::TOnly, Variant::WOnly, Variant::Unconditional];

    pub fn uses_t(self) -> bool {
        matches!(self, Variant::Full | Variant::TOnly)
    }

    pub fn uses_w(self) -> bool {
        matches!(self, Variant::Full | Variant::WOnly)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::TOnly => "t-only",
            Variant::WOnly => "w-only",
            Variant::Unconditional => "unconditional",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown variant `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Elu,
    Softplus,
    Sigmoid,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelConfig {
    pub latent_dim: usize,
    pub d_x: usize,
    pub d_w: usize,
    pub hidden_width: usize,
    /// Number of hidden layers in each network.
    pub num_layers: usize,
    pub activation: Activation,
    pub prior_mode: PriorMode,
    pub variant: Variant,
}

impl ModelConfig {
    pub fn new(d_x: usize, d_w: usize, latent_dim: usize) -> Self {
        Self {
            latent_dim,
            d_x,
            d_w,
            hidden_width: 64,
            num_layers: 3,
            activation: Activation::Elu,
            prior_mode: PriorMode::LearnedConditional,
            variant: Variant::Full,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
        if self.latent_dim == 0 {
            return bad("latent_dim must be at least 1");
        }
        if self.num_layers == 0 || self.hidden_width == 0 {
            return bad("num_layers and hidden_width must be at least 1");
        }
        if self.d_x == 0 {
            return bad("at least one proxy column is required");
        }
        Ok(())
    }

    /// Width of the (T, W) conditioning input selected by the variant.
    pub fn conditioning_dim(&self) -> usize {
        usize::from(self.variant.uses_t()) + if self.variant.uses_w() { self.d_w } else { 0 }
    }
}
