//! Image quality metrics on the luma channel, the relative content increasing
//! rate, and the Gaussian-noise robustness protocol.

mod features;
mod noise;
mod quality;
mod report;

use thiserror::Error;

pub use features::{rcir, rcir_parts, FeatureExtractor, RandomConvExtractor};
pub use noise::{add_gaussian_noise, gaussian_field, noisy_input, NoiseTarget, NOISE_VARIANCES};
pub use quality::{luma, psnr, rgb_to_y, ssim, y_from_tensor, YImage, SSIM_WINDOW};
pub use report::{mean_scores, score, write_report, Scores};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("expected 3 colour channels, got {0}")]
    Channels(usize),
    #[error("border crop {crop} leaves nothing of a {h}x{w} image")]
    Crop { crop: usize, h: usize, w: usize },
    #[error("{h}x{w} region is smaller than the {window}x{window} SSIM window")]
    TooSmall { h: usize, w: usize, window: usize },
    #[error("degenerate input: high-resolution and bicubic images have identical features")]
    Degenerate,
    #[error("noise variance must be finite and non-negative, got {0}")]
    Variance(f64),
}
