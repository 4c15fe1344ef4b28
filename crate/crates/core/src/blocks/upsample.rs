use rand::Rng;

use crate::tensor::{ParamId, ParamStore, Real, Tape, Var};

use super::layers::{prelu_slope, Conv, Deconv};
use super::ModelError;

/// One 2x stage: `PReLU(deconv(x)) + conv1x1(nearest(x))`.
///
/// With `low_path` disabled the stage is a plain deconvolution + PReLU.
#[derive(Clone, Debug)]
pub struct ResidualDeconvStage {
    pub deconv: Deconv,
    pub slope: ParamId,
    pub low_path: Option<Conv>,
    channels: usize,
}

impl ResidualDeconvStage {
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        rng: &mut impl Rng,
        name: &str,
        channels: usize,
        residual: bool,
    ) -> Result<Self, ModelError> {
        let deconv = Deconv::new(store, rng, &format!("{name}.deconv"), channels)?;
        let slope = prelu_slope(store, &format!("{name}.prelu"))?;
        let low_path =
            if residual { Some(Conv::new(store, rng, &format!("{name}.low"), channels, channels, 1)?) } else { None };
        Ok(ResidualDeconvStage { deconv, slope, low_path, channels })
    }

    pub fn forward<T: Real>(&self, tape: &Tape<T>, store: &ParamStore<T>, x: &Var<T>) -> Result<Var<T>, ModelError> {
        let c = x.value().dims4("residual deconvolution")?[1];
        if c != self.channels {
            return Err(ModelError::Channels { at: "upsampling stage", expected: self.channels, got: c });
        }
        let high = self.deconv.forward(tape, store, x)?;
        let high = tape.prelu(&high, &tape.param(store, self.slope))?;
        match &self.low_path {
            Some(conv) => {
                let low = conv.forward(tape, store, &tape.nearest_upsample(x, 2)?)?;
                Ok(tape.add(&high, &low)?)
            }
            None => Ok(high),
        }
    }
}
