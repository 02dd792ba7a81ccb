//! Reverse-mode automatic differentiation over dense row-major matrices.
//!
//! Every value is a 2-D [`Tensor`]; scalars are `1×1`. A [`Tape`] records
//! operations as they are evaluated and [`Tape::backward`] walks the record
//! once in reverse. Trainable tensors live in a [`ParamStore`] and are copied
//! onto a tape with [`Tape::param`]; their gradients are added into the
//! store's gradient buffers.

mod dist;
mod optim;
mod tape;
mod tensor;

pub use dist::{gaussian_log_pdf, kl_diag_gaussians};
pub use optim::{Adam, AdamConfig};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AutodiffError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: [usize; 2],
        right: [usize; 2],
    },
    #[error("buffer of length {len} does not match shape {shape:?}")]
    BadBuffer { shape: [usize; 2], len: usize },
    #[error("loss must be a 1×1 tensor, got {0:?}")]
    NonScalarLoss([usize; 2]),
    #[error("tape was already consumed by a backward pass")]
    TapeConsumed,
    #[error("{0}: variance must be positive, found {1}")]
    NonPositiveVariance(&'static str, f64),
    #[error("invalid hyperparameter: {0}")]
    InvalidHyper(String),
    #[error("optimizer state does not match the parameter store")]
    StateMismatch,
}

pub type Result<T> = std::result::Result<T, AutodiffError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    #[serde(skip)]
    grad: Option<Tensor>,
}

impl Param {
    /// Accumulated gradient, zero-shaped like the value when nothing has been
    /// accumulated yet.
    pub fn grad(&self) -> Tensor {
        self.grad
            .clone()
            .unwrap_or_else(|| Tensor::zeros(self.value.rows(), self.value.cols()))
    }
}

/// Named trainable tensors with gradient buffers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.params.push(Param {
            name: name.into(),
            value,
            grad: None,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad = None;
        }
    }

    pub(crate) fn accumulate_grad(&mut self, id: ParamId, g: &Tensor) {
        let p = &mut self.params[id.0];
        match &mut p.grad {
            Some(acc) => acc.add_assign(g),
            None => p.grad = Some(g.clone()),
        }
    }

    pub(crate) fn grad_ref(&self, id: ParamId) -> Option<&Tensor> {
        self.params[id.0].grad.as_ref()
    }
}
