use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::imageio::{degrade, ImageError, RgbImage};

use super::MetricError;

/// Noise variances of the robustness sweep, in normalized [0, 1] intensity units.
pub const NOISE_VARIANCES: [f64; 4] = [5e-5, 1e-4, 2e-4, 5e-4];

/// `len` i.i.d. zero-mean Gaussian samples with the given variance.
pub fn gaussian_field(len: usize, variance: f64, seed: u64) -> Result<Vec<f64>, MetricError> {
    if !variance.is_finite() || variance < 0.0 {
        return Err(MetricError::Variance(variance));
    }
    let normal = Normal::new(0.0, variance.sqrt()).map_err(|_| MetricError::Variance(variance))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..len).map(|_| normal.sample(&mut rng)).collect())
}

/// Adds Gaussian noise to every sample, then clamps to [0, 1].
pub fn add_gaussian_noise(image: &RgbImage, variance: f64, seed: u64) -> Result<RgbImage, MetricError> {
    if variance == 0.0 {
        return Ok(image.clone());
    }
    let field = gaussian_field(image.data().len(), variance, seed)?;
    let data = image.data().iter().zip(&field).map(|(&v, &n)| (v as f64 + n).clamp(0.0, 1.0) as f32).collect();
    RgbImage::new(image.width(), image.height(), data).map_err(|e| MetricError::Shape(e.to_string()))
}

/// Where noise enters the degradation pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseTarget {
    /// Noise on the low-resolution input after bicubic shrinking.
    Lr,
    /// Noise on the high-resolution image before shrinking.
    Hr,
}

/// Noisy low-resolution input for a clean high-resolution reference.
pub fn noisy_input(
    hr: &RgbImage,
    scale: usize,
    variance: f64,
    seed: u64,
    target: NoiseTarget,
) -> Result<RgbImage, MetricError> {
    let shape = |e: ImageError| MetricError::Shape(e.to_string());
    match target {
        NoiseTarget::Lr => add_gaussian_noise(&degrade(hr, scale).map_err(shape)?, variance, seed),
        NoiseTarget::Hr => degrade(&add_gaussian_noise(hr, variance, seed)?, scale).map_err(shape),
    }
}
