//! Network building blocks and the full 4x super-resolution model.

mod attention;
mod config;
mod dense;
mod layers;
mod network;
mod upsample;

use thiserror::Error;

use crate::tensor::TensorError;

pub use attention::{AttentionMaps, SpatialAttention};
pub use config::{ChannelPlan, NetworkConfig};
pub use dense::{DenseLayer, WeightedDenseBlock};
pub use layers::{Conv, Deconv};
pub use network::{format_weight_matrices, ForwardTrace, Group, Network, WeightMatrix, RECONSTRUCTION_INIT_SCALE};
pub use upsample::ResidualDeconvStage;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid network config: {0}")]
    Config(String),
    #[error("dense layer expects {expected} input feature maps, got {got}")]
    FeatureCount { expected: usize, got: usize },
    #[error("{at}: expected {expected} channels, got {got}")]
    Channels { at: &'static str, expected: usize, got: usize },
    #[error("image: {0}")]
    Image(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}
