//! Patch-based training with MSE loss, Adam and a step-decay schedule, plus
//! checkpoint persistence.

mod adam;
mod checkpoint;
mod config;
mod sampler;
mod trainer;

use thiserror::Error;

use crate::blocks::ModelError;
use crate::kv::KvError;

pub use adam::AdamState;
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, MAGIC};
pub use config::{lr_at_epoch, TrainConfig};
pub use sampler::{Batch, PatchSampler};
pub use trainer::{write_log_header, write_log_row, BatchStats, EpochRecord, TrainReport, Trainer};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("dataset: {0}")]
    Data(String),
    #[error("no gradient reached parameter `{0}`")]
    MissingGradient(String),
    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),
    #[error("non-finite loss {loss} at step {step}; last batch: {stats}")]
    NonFiniteLoss { step: u64, loss: f64, stats: BatchStats },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl From<KvError> for TrainError {
    fn from(e: KvError) -> Self {
        TrainError::Config(e.to_string())
    }
}

impl From<crate::tensor::TensorError> for TrainError {
    fn from(e: crate::tensor::TensorError) -> Self {
        TrainError::Model(e.into())
    }
}
