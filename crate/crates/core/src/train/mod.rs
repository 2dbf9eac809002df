//! Smooth-L1 objective and the Adam training loop with checkpointing,
//! metric logging and the Gaussian scale-factor sweep.

mod loop_;
mod loss;

pub use loop_::{
    sweep_scale_factor, train, EpochMetrics, SweepRow, TrainOptions, TrainOutcome,
};
pub use loss::{grasp_loss, smooth_l1, stack_targets, tape_grasp_loss, LossConfig};

use crate::data::DataError;
use crate::eval::EvalError;
use crate::grasp::GraspError;
use crate::net::NetError;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("prediction and target maps have different shapes")]
    ShapeMismatch,
    #[error("invalid loss config: {0}")]
    BadLossConfig(String),
    #[error("invalid train config: {0}")]
    BadTrainConfig(String),
    #[error("training split is empty")]
    EmptySplit,
    #[error("sample id {0} not present in dataset")]
    UnknownSample(String),
    #[error(
        "non-finite loss at epoch {epoch}, batch {batch}; offending sample ids: {sample_ids:?}"
    )]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        sample_ids: Vec<String>,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Grasp(#[from] GraspError),
}

/// Optimization hyperparameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 8,
            epochs: 100,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.learning_rate > 0.0) {
            return Err(TrainError::BadTrainConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(TrainError::BadTrainConfig(
                "batch size must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Stable 64-bit FNV-1a mix for deriving per-(seed, epoch, sample) RNG
/// streams.
pub(crate) fn mix_seed(base: u64, epoch: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    eat(&base.to_le_bytes());
    eat(&epoch.to_le_bytes());
    eat(tag.as_bytes());
    h
}
