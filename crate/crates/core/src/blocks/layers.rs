use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::tensor::{ParamId, ParamStore, Real, Tape, Tensor, Var};

use super::ModelError;

pub(crate) const PRELU_INIT: f64 = 0.25;

fn he_normal<T: Real>(rng: &mut impl Rng, shape: &[usize], fan_in: usize) -> Tensor<T> {
    let std = (2.0 / fan_in as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("positive std");
    Tensor::from_fn(shape, |_| T::from_f64_lossy(normal.sample(rng)))
}

/// Convolution with bias, padding chosen so odd kernels preserve H and W.
#[derive(Clone, Debug)]
pub struct Conv {
    pub weight: ParamId,
    pub bias: ParamId,
    pub padding: usize,
}

impl Conv {
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        rng: &mut impl Rng,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
    ) -> Result<Self, ModelError> {
        Self::with_init_scale(store, rng, name, in_channels, out_channels, kernel, 1.0)
    }

    /// As [`Conv::new`], with the He-normal weights multiplied by `scale`.
    pub fn with_init_scale<T: Real>(
        store: &mut ParamStore<T>,
        rng: &mut impl Rng,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        scale: f64,
    ) -> Result<Self, ModelError> {
        let shape = [out_channels, in_channels, kernel, kernel];
        let fan_in = in_channels * kernel * kernel;
        let weight = store
            .add(format!("{name}.weight"), he_normal(rng, &shape, fan_in).map(|w| w * T::from_f64_lossy(scale)))?;
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[out_channels]))?;
        Ok(Conv { weight, bias, padding: kernel / 2 })
    }

    pub fn forward<T: Real>(&self, tape: &Tape<T>, store: &ParamStore<T>, x: &Var<T>) -> Result<Var<T>, ModelError> {
        let w = tape.param(store, self.weight);
        let b = tape.param(store, self.bias);
        Ok(tape.conv2d(x, &w, Some(&b), 1, self.padding)?)
    }

    pub fn out_channels<T: Real>(&self, store: &ParamStore<T>) -> usize {
        store.value(self.weight).shape()[0]
    }
}

/// 4x4 transposed convolution, stride 2, padding 1: exact 2x spatial growth.
#[derive(Clone, Debug)]
pub struct Deconv {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Deconv {
    pub const KERNEL: usize = 4;
    pub const STRIDE: usize = 2;
    pub const PADDING: usize = 1;

    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        rng: &mut impl Rng,
        name: &str,
        channels: usize,
    ) -> Result<Self, ModelError> {
        let k = Self::KERNEL;
        let shape = [channels, channels, k, k];
        // Each output pixel receives channels * (k / stride)^2 taps.
        let fan_in = channels * (k / Self::STRIDE) * (k / Self::STRIDE);
        let weight = store.add(format!("{name}.weight"), he_normal(rng, &shape, fan_in))?;
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[channels]))?;
        Ok(Deconv { weight, bias })
    }

    pub fn forward<T: Real>(&self, tape: &Tape<T>, store: &ParamStore<T>, x: &Var<T>) -> Result<Var<T>, ModelError> {
        let w = tape.param(store, self.weight);
        let b = tape.param(store, self.bias);
        Ok(tape.conv_transpose2d(x, &w, Some(&b), Self::STRIDE, Self::PADDING)?)
    }
}

pub(crate) fn prelu_slope<T: Real>(store: &mut ParamStore<T>, name: &str) -> Result<ParamId, ModelError> {
    Ok(store.add(format!("{name}.slope"), Tensor::scalar(T::from_f64_lossy(PRELU_INIT)))?)
}
