use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::imageio::{degrade, Dihedral, RgbImage};
use crate::tensor::Tensor;

use super::TrainError;

/// One training batch: LR inputs `[B, 3, p/s, p/s]` and HR targets `[B, 3, p, p]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub lr: Tensor<f32>,
    pub hr: Tensor<f32>,
    /// `(image index, top, left, transform)` per batch item.
    pub sources: Vec<(usize, usize, usize, Dihedral)>,
}

/// Random patch crops with dihedral augmentation and bicubic degradation.
/// Batch `k` depends only on the seed and `k`.
#[derive(Clone, Debug)]
pub struct PatchSampler {
    images: Vec<RgbImage>,
    patch: usize,
    scale: usize,
    flip: bool,
    rotate: bool,
    seed: u64,
}

impl PatchSampler {
    pub fn new(
        images: Vec<RgbImage>,
        patch: usize,
        scale: usize,
        flip: bool,
        rotate: bool,
        seed: u64,
    ) -> Result<Self, TrainError> {
        if images.is_empty() {
            return Err(TrainError::Data("training set is empty".into()));
        }
        if patch == 0 || scale == 0 || !patch.is_multiple_of(scale) {
            return Err(TrainError::Config(format!("patch {patch} must be a positive multiple of scale {scale}")));
        }
        if let Some((i, img)) = images.iter().enumerate().find(|(_, im)| im.width() < patch || im.height() < patch) {
            return Err(TrainError::Data(format!(
                "image {i} is {}x{}, smaller than the {patch}x{patch} patch",
                img.width(),
                img.height()
            )));
        }
        Ok(PatchSampler { images, patch, scale, flip, rotate, seed })
    }

    pub fn images(&self) -> &[RgbImage] {
        &self.images
    }

    fn rng(&self, step: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(step);
        rng
    }

    pub fn batch(&self, step: u64, size: usize) -> Result<Batch, TrainError> {
        let mut rng = self.rng(step);
        let mut lrs = Vec::with_capacity(size);
        let mut hrs = Vec::with_capacity(size);
        let mut sources = Vec::with_capacity(size);
        for _ in 0..size {
            let index = rng.random_range(0..self.images.len());
            let img = &self.images[index];
            let top = rng.random_range(0..=img.height() - self.patch);
            let left = rng.random_range(0..=img.width() - self.patch);
            let hflip = self.flip && rng.random::<bool>();
            let turns = if self.rotate { rng.random_range(0..4u8) } else { 0 };
            let t = Dihedral::compose(hflip, turns);
            let data = |e: crate::imageio::ImageError| TrainError::Data(e.to_string());
            let hr = img.crop(top, left, self.patch, self.patch).map_err(data)?.transform(t);
            let lr = degrade(&hr, self.scale).map_err(data)?;
            hrs.push(hr.to_tensor());
            lrs.push(lr.to_tensor());
            sources.push((index, top, left, t));
        }
        Ok(Batch { lr: Tensor::concat_batch(&lrs)?, hr: Tensor::concat_batch(&hrs)?, sources })
    }
}
