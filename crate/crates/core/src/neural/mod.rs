//! One-hidden-layer MLP over sparse inputs, trained with hand-derived
//! gradients.
//!
//! ```text
//! x (sparse) -> z = W x + b -> a = relu(z) * dropout_mask -> softmax(task head)
//!                                        \-> grad_reverse(λ) -> softmax(domain head)
//! ```
//!
//! Every gradient path used in training goes through the same batch
//! routines that [`grad_check`] compares against central differences.

mod checkpoint;
mod gradcheck;
mod grads;
mod model;
mod optim;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use gradcheck::{grad_check, toy_inputs, CheckKind, GradCheckReport};
pub use grads::{cross_entropy, smoothed_cross_entropy, GradReverse};
pub use model::{Dense, ForwardCache, MlpModel, Mode};
pub use optim::OptimizerKind;
pub use train::{mc_dropout_predict, pretrain_denoising, train_dann, train_supervised, MASK_FRACTION};

#[derive(Debug, Error, PartialEq)]
pub enum NeuralError {
    #[error("input dimension {found} does not match model input {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("smoothing alpha {0} outside [0,1]")]
    InvalidAlpha(f64),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("model has no domain head")]
    MissingDomainHead,
    #[error("unlabeled {0} set is empty")]
    EmptyUnlabeled(&'static str),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub smoothing_alpha: f64,
    pub dann_lambda: f64,
    pub mc_passes: usize,
    pub dropout_rate: f64,
    pub weight_decay: f64,
    pub rng_seed: u64,
    pub hidden_dim: usize,
    /// Epochs of denoising pretraining.
    pub pretrain_epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-3,
            batch_size: 8,
            epochs: 30,
            smoothing_alpha: 0.1,
            dann_lambda: 0.1,
            mc_passes: 20,
            dropout_rate: 0.1,
            weight_decay: 1e-4,
            rng_seed: 0,
            hidden_dim: 64,
            pretrain_epochs: 3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        let bad = |m: String| Err(NeuralError::InvalidConfig(m));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.smoothing_alpha) {
            return Err(NeuralError::InvalidAlpha(self.smoothing_alpha));
        }
        if !(self.dann_lambda >= 0.0 && self.dann_lambda.is_finite()) {
            return bad(format!("dann_lambda {}", self.dann_lambda));
        }
        if self.mc_passes == 0 {
            return bad("mc_passes must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate {} outside [0,1)", self.dropout_rate));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight_decay {}", self.weight_decay));
        }
        if self.hidden_dim == 0 {
            return bad("hidden_dim must be >= 1".into());
        }
        Ok(())
    }
}
