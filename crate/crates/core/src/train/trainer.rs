use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::blocks::Network;
use crate::imageio::{degrade, modcrop, super_resolve, RgbImage};
use crate::kv::KvMap;
use crate::metrics::{psnr, rgb_to_y};
use crate::tensor::{Tape, Tensor, Var};

use super::checkpoint::{save_checkpoint, Checkpoint};
use super::{lr_at_epoch, AdamState, PatchSampler, TrainConfig, TrainError};

/// State keys describing the loop position rather than the config.
const LOOP_KEYS: [&str; 3] = ["step", "epoch_loss_bits", "epoch_steps"];

/// Value ranges of the batch that produced a non-finite loss.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchStats {
    pub input: [f64; 3],
    pub target: [f64; 3],
    pub output: [f64; 3],
    pub non_finite_outputs: usize,
}

/// `[min, max, mean]` over the finite entries.
fn range(t: &Tensor<f32>) -> [f64; 3] {
    let finite = t.data().iter().filter(|v| v.is_finite()).map(|&v| v as f64);
    let (mut lo, mut hi, mut sum, mut n) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for v in finite {
        lo = lo.min(v);
        hi = hi.max(v);
        sum += v;
        n += 1;
    }
    [lo, hi, if n == 0 { f64::NAN } else { sum / n as f64 }]
}

impl fmt::Display for BatchStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = |x: &[f64; 3]| format!("min {:.4} max {:.4} mean {:.4}", x[0], x[1], x[2]);
        write!(
            f,
            "input {}; target {}; output {}; {} non-finite outputs",
            r(&self.input),
            r(&self.target),
            r(&self.output),
            self.non_finite_outputs
        )
    }
}

/// One row of the training log; `epoch` counts completed epochs from 1.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub step: u64,
    pub lr: f64,
    pub loss: f64,
    pub val_psnr: Option<f64>,
}

impl EpochRecord {
    pub const CSV_HEADER: [&'static str; 5] = ["epoch", "step", "lr", "loss", "val_psnr"];

    pub fn csv_fields(&self) -> [String; 5] {
        [
            self.epoch.to_string(),
            self.step.to_string(),
            self.lr.to_string(),
            self.loss.to_string(),
            self.val_psnr.map(|p| p.to_string()).unwrap_or_default(),
        ]
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    /// Loss of every step run by this call, in order.
    pub step_losses: Vec<f64>,
    pub epochs: Vec<EpochRecord>,
    pub checkpoints: Vec<PathBuf>,
}

/// Owns the network and optimizer for the duration of training.
#[derive(Clone, Debug)]
pub struct Trainer {
    network: Network<f32>,
    adam: AdamState<f32>,
    config: TrainConfig,
    sampler: PatchSampler,
    validation: Vec<RgbImage>,
    step: u64,
    epoch_loss: f64,
    epoch_steps: u64,
}

impl Trainer {
    pub fn new(
        network: Network<f32>,
        images: Vec<RgbImage>,
        validation: Vec<RgbImage>,
        config: TrainConfig,
    ) -> Result<Self, TrainError> {
        config.validate()?;
        if config.scale != network.config().scale_factor {
            return Err(TrainError::Config(format!(
                "training scale {} differs from the network scale {}",
                config.scale,
                network.config().scale_factor
            )));
        }
        let sampler = PatchSampler::new(
            images,
            config.hr_patch_size,
            config.scale,
            config.augment_flip,
            config.augment_rotate,
            config.seed,
        )?;
        let adam = AdamState::new(network.params(), config.initial_lr);
        Ok(Trainer { network, adam, config, sampler, validation, step: 0, epoch_loss: 0.0, epoch_steps: 0 })
    }

    /// Continues from a checkpoint written by [`Trainer::state`] and [`Trainer::checkpoint`].
    pub fn resume(
        checkpoint: Checkpoint,
        images: Vec<RgbImage>,
        validation: Vec<RgbImage>,
        config: TrainConfig,
    ) -> Result<Self, TrainError> {
        let adam =
            checkpoint.optimizer.ok_or_else(|| TrainError::Checkpoint("no optimizer state to resume from".into()))?;
        let mut trainer = Trainer::new(checkpoint.network, images, validation, config)?;
        let s = &checkpoint.state;
        trainer.adam = adam;
        trainer.step = s.require("step")?;
        trainer.epoch_loss = f64::from_bits(s.require("epoch_loss_bits")?);
        trainer.epoch_steps = s.require("epoch_steps")?;
        Ok(trainer)
    }

    pub fn network(&self) -> &Network<f32> {
        &self.network
    }

    pub fn into_network(self) -> Network<f32> {
        self.network
    }

    pub fn optimizer(&self) -> &AdamState<f32> {
        &self.adam
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Optimizer steps taken so far.
    pub fn steps_done(&self) -> u64 {
        self.step
    }

    pub fn steps_per_epoch(&self) -> u64 {
        self.config.steps_per_epoch(self.sampler.images().len())
    }

    /// Step at which [`Trainer::run`] stops.
    pub fn total_steps(&self) -> u64 {
        let full = self.config.epochs as u64 * self.steps_per_epoch();
        if self.config.max_steps > 0 {
            full.min(self.config.max_steps)
        } else {
            full
        }
    }

    /// Training config recorded in a checkpoint state.
    pub fn config_from_state(state: &KvMap) -> Result<TrainConfig, TrainError> {
        let mut map = KvMap::new();
        for key in state.keys().filter(|k| !LOOP_KEYS.contains(k)) {
            map.set(key, state.get(key).unwrap_or_default());
        }
        TrainConfig::from_kv(&map, &TrainConfig::default())
    }

    /// Training config plus the loop position, as stored in checkpoints.
    pub fn state(&self) -> KvMap {
        let mut m = self.config.to_kv();
        m.set("step", self.step);
        m.set("epoch_loss_bits", self.epoch_loss.to_bits());
        m.set("epoch_steps", self.epoch_steps);
        m
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TrainError> {
        save_checkpoint(path, &self.network, &self.state(), Some(&self.adam))
    }

    /// One forward/backward/update on the next batch; returns the batch loss.
    pub fn train_step(&mut self) -> Result<f64, TrainError> {
        let epoch = (self.step / self.steps_per_epoch()) as usize;
        self.adam.lr = lr_at_epoch(&self.config, epoch);
        let batch = self.sampler.batch(self.step, self.config.batch_size)?;
        let grads = {
            let tape = Tape::new();
            let out = self.network.forward(&tape, &Var::constant(batch.lr.clone()))?;
            let loss = tape.mse_loss(&out, &Var::constant(batch.hr.clone()))?;
            let value = loss.value().item() as f64;
            if !value.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    step: self.step,
                    loss: value,
                    stats: BatchStats {
                        input: range(&batch.lr),
                        target: range(&batch.hr),
                        output: range(out.value()),
                        non_finite_outputs: out.value().data().iter().filter(|v| !v.is_finite()).count(),
                    },
                });
            }
            (tape.backward(&loss)?, value)
        };
        let (grads, loss) = grads;
        self.adam.step(self.network.params_mut(), &grads)?;
        self.step += 1;
        self.epoch_loss += loss;
        self.epoch_steps += 1;
        Ok(loss)
    }

    /// Mean luma PSNR of the current network over the validation images.
    pub fn validate(&self) -> Result<Option<f64>, TrainError> {
        if self.validation.is_empty() {
            return Ok(None);
        }
        let s = self.config.scale;
        let data = |e: crate::imageio::ImageError| TrainError::Data(e.to_string());
        let mut total = 0.0;
        for hr in &self.validation {
            let hr = modcrop(hr, s).map_err(data)?;
            let sr = super_resolve(&self.network, &degrade(&hr, s).map_err(data)?)?;
            total += psnr(&rgb_to_y(&hr), &rgb_to_y(&sr.quantized()), self.config.val_border)
                .map_err(|e| TrainError::Data(e.to_string()))?;
        }
        Ok(Some(total / self.validation.len() as f64))
    }

    /// Trains until [`Trainer::total_steps`]. `on_epoch` sees every completed
    /// epoch; with `checkpoint_dir`, periodic `epochNNNN.adrd` files and a
    /// final `latest.adrd` are written there.
    pub fn run(
        &mut self,
        on_epoch: &mut dyn FnMut(&EpochRecord) -> Result<(), TrainError>,
        checkpoint_dir: Option<&Path>,
    ) -> Result<TrainReport, TrainError> {
        let mut report = TrainReport::default();
        let per_epoch = self.steps_per_epoch();
        let total = self.total_steps();
        while self.step < total {
            report.step_losses.push(self.train_step()?);
            if !self.step.is_multiple_of(per_epoch) {
                continue;
            }
            let epoch = (self.step / per_epoch) as usize;
            let record = EpochRecord {
                epoch,
                step: self.step,
                lr: lr_at_epoch(&self.config, epoch - 1),
                loss: self.epoch_loss / self.epoch_steps as f64,
                val_psnr: self.validate()?,
            };
            self.epoch_loss = 0.0;
            self.epoch_steps = 0;
            on_epoch(&record)?;
            report.epochs.push(record);
            if let Some(dir) = checkpoint_dir {
                if self.config.checkpoint_every > 0 && epoch.is_multiple_of(self.config.checkpoint_every) {
                    let path = dir.join(format!("epoch{epoch:04}.adrd"));
                    self.save(&path)?;
                    report.checkpoints.push(path);
                }
            }
        }
        if let Some(dir) = checkpoint_dir {
            let path = dir.join("latest.adrd");
            self.save(&path)?;
            report.checkpoints.push(path);
        }
        Ok(report)
    }
}

/// CSV training log writer.
pub fn write_log_header<W: Write>(w: &mut csv::Writer<W>) -> Result<(), TrainError> {
    w.write_record(EpochRecord::CSV_HEADER).map_err(|e| TrainError::Io(e.to_string()))
}

pub fn write_log_row<W: Write>(w: &mut csv::Writer<W>, record: &EpochRecord) -> Result<(), TrainError> {
    w.write_record(record.csv_fields()).map_err(|e| TrainError::Io(e.to_string()))?;
    w.flush().map_err(|e| TrainError::Io(e.to_string()))
}
