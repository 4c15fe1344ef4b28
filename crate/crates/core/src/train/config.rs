use crate::kv::KvMap;

use super::TrainError;

/// Optimization protocol. Text form is flat `key=value`, one key per field.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub hr_patch_size: usize,
    pub scale: usize,
    pub batch_size: usize,
    pub initial_lr: f64,
    pub lr_decay_every: usize,
    pub lr_decay_factor: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Patches drawn per training image per epoch.
    pub patches_per_image: usize,
    pub augment_flip: bool,
    pub augment_rotate: bool,
    /// Hard cap on optimizer steps; 0 means no cap.
    pub max_steps: u64,
    /// Checkpoint period in epochs; 0 disables periodic checkpoints.
    pub checkpoint_every: usize,
    /// Border excluded from validation PSNR.
    pub val_border: usize,
}

const KEYS: &[&str] = &[
    "hr_patch_size",
    "scale",
    "batch_size",
    "initial_lr",
    "lr_decay_every",
    "lr_decay_factor",
    "epochs",
    "seed",
    "patches_per_image",
    "augment_flip",
    "augment_rotate",
    "max_steps",
    "checkpoint_every",
    "val_border",
];

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hr_patch_size: 200,
            scale: 4,
            batch_size: 16,
            initial_lr: 1e-4,
            lr_decay_every: 200,
            lr_decay_factor: 0.5,
            epochs: 500,
            seed: 0,
            patches_per_image: 32,
            augment_flip: true,
            augment_rotate: true,
            max_steps: 0,
            checkpoint_every: 0,
            val_border: 4,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let err = |m: String| Err(TrainError::Config(m));
        for (name, v) in [
            ("hr_patch_size", self.hr_patch_size),
            ("scale", self.scale),
            ("batch_size", self.batch_size),
            ("lr_decay_every", self.lr_decay_every),
            ("epochs", self.epochs),
            ("patches_per_image", self.patches_per_image),
        ] {
            if v == 0 {
                return err(format!("{name} must be positive"));
            }
        }
        if !self.hr_patch_size.is_multiple_of(self.scale) {
            return err(format!("hr_patch_size {} is not divisible by scale {}", self.hr_patch_size, self.scale));
        }
        if !(self.initial_lr.is_finite() && self.initial_lr >= 0.0) {
            return err(format!("initial_lr {} must be finite and non-negative", self.initial_lr));
        }
        if !(self.lr_decay_factor.is_finite() && self.lr_decay_factor > 0.0) {
            return err(format!("lr_decay_factor {} must be positive", self.lr_decay_factor));
        }
        Ok(())
    }

    pub fn lr_patch_size(&self) -> usize {
        self.hr_patch_size / self.scale
    }

    /// Optimizer steps per epoch for a dataset of `images` images.
    pub fn steps_per_epoch(&self, images: usize) -> u64 {
        (images * self.patches_per_image).div_ceil(self.batch_size) as u64
    }

    pub fn to_kv(&self) -> KvMap {
        let mut m = KvMap::new();
        m.set("hr_patch_size", self.hr_patch_size);
        m.set("scale", self.scale);
        m.set("batch_size", self.batch_size);
        m.set("initial_lr", self.initial_lr);
        m.set("lr_decay_every", self.lr_decay_every);
        m.set("lr_decay_factor", self.lr_decay_factor);
        m.set("epochs", self.epochs);
        m.set("seed", self.seed);
        m.set("patches_per_image", self.patches_per_image);
        m.set("augment_flip", self.augment_flip);
        m.set("augment_rotate", self.augment_rotate);
        m.set("max_steps", self.max_steps);
        m.set("checkpoint_every", self.checkpoint_every);
        m.set("val_border", self.val_border);
        m
    }

    /// Reads a config; keys absent from `map` keep the values of `base`.
    pub fn from_kv(map: &KvMap, base: &TrainConfig) -> Result<Self, TrainError> {
        map.check_keys(KEYS)?;
        let mut c = base.clone();
        macro_rules! read {
            ($($field:ident),*) => {$(
                if let Some(v) = map.parse_value(stringify!($field))? {
                    c.$field = v;
                }
            )*};
        }
        read!(
            hr_patch_size,
            scale,
            batch_size,
            initial_lr,
            lr_decay_every,
            lr_decay_factor,
            epochs,
            seed,
            patches_per_image,
            augment_flip,
            augment_rotate,
            max_steps,
            checkpoint_every,
            val_border
        );
        c.validate()?;
        Ok(c)
    }

    pub fn parse(text: &str) -> Result<Self, TrainError> {
        Self::from_kv(&KvMap::parse(text)?, &Self::default())
    }
}

/// Step-decayed learning rate: `initial_lr * factor^floor(epoch / every)`.
pub fn lr_at_epoch(config: &TrainConfig, epoch: usize) -> f64 {
    config.initial_lr * config.lr_decay_factor.powi((epoch / config.lr_decay_every) as i32)
}
