use rand::Rng;

use crate::tensor::{ParamStore, Real, Tape, Var};

use super::layers::Conv;
use super::ModelError;

/// Intermediate maps of one attention pass.
#[derive(Clone, Debug)]
pub struct AttentionMaps<T> {
    pub bottleneck: Var<T>,
    pub residual: Var<T>,
    pub attention: Var<T>,
    pub enhanced: Var<T>,
}

/// Bottleneck plus residual spatial attention.
///
/// The bottleneck (1x1 conv + ReLU) compresses the dense block output back to
/// the head's channel count. The attention branch turns `|x_in - x_bot|` into
/// maps in (-1, 1) through 3x3 conv, ReLU, 3x3 conv, ReLU, 1x1 conv and tanh,
/// and returns `lambda * att * x_bot + x_bot`.
#[derive(Clone, Debug)]
pub struct SpatialAttention {
    pub bottleneck: Conv,
    /// `None` when attention is disabled; the module then returns `x_bot`.
    pub branch: Option<[Conv; 3]>,
    pub lambda: f64,
    channels: usize,
}

impl SpatialAttention {
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        rng: &mut impl Rng,
        name: &str,
        channels: usize,
        block_channels: usize,
        lambda: f64,
        enabled: bool,
    ) -> Result<Self, ModelError> {
        let bottleneck = Conv::new(store, rng, &format!("{name}.bottleneck"), block_channels, channels, 1)?;
        let branch = if enabled {
            Some([
                Conv::new(store, rng, &format!("{name}.att1"), channels, channels, 3)?,
                Conv::new(store, rng, &format!("{name}.att2"), channels, channels, 3)?,
                Conv::new(store, rng, &format!("{name}.att3"), channels, channels, 1)?,
            ])
        } else {
            None
        };
        Ok(SpatialAttention { bottleneck, branch, lambda, channels })
    }

    pub fn forward<T: Real>(
        &self,
        tape: &Tape<T>,
        store: &ParamStore<T>,
        x_in: &Var<T>,
        block_out: &Var<T>,
    ) -> Result<Var<T>, ModelError> {
        let bottleneck = self.compress(tape, store, x_in, block_out)?;
        match &self.branch {
            Some(branch) => Ok(self.attend(tape, store, branch, x_in, bottleneck)?.enhanced),
            None => Ok(bottleneck),
        }
    }

    /// All intermediate maps; fails if attention is disabled.
    pub fn forward_maps<T: Real>(
        &self,
        tape: &Tape<T>,
        store: &ParamStore<T>,
        x_in: &Var<T>,
        block_out: &Var<T>,
    ) -> Result<AttentionMaps<T>, ModelError> {
        let branch =
            self.branch.as_ref().ok_or_else(|| ModelError::Config("attention is disabled for this module".into()))?;
        let bottleneck = self.compress(tape, store, x_in, block_out)?;
        self.attend(tape, store, branch, x_in, bottleneck)
    }

    fn compress<T: Real>(
        &self,
        tape: &Tape<T>,
        store: &ParamStore<T>,
        x_in: &Var<T>,
        block_out: &Var<T>,
    ) -> Result<Var<T>, ModelError> {
        let c = x_in.value().dims4("spatial attention")?[1];
        if c != self.channels {
            return Err(ModelError::Channels { at: "attention input", expected: self.channels, got: c });
        }
        let bot = self.bottleneck.forward(tape, store, block_out)?;
        Ok(tape.relu(&bot))
    }

    fn attend<T: Real>(
        &self,
        tape: &Tape<T>,
        store: &ParamStore<T>,
        [c1, c2, c3]: &[Conv; 3],
        x_in: &Var<T>,
        bottleneck: Var<T>,
    ) -> Result<AttentionMaps<T>, ModelError> {
        let residual = tape.abs_diff(x_in, &bottleneck)?;
        let h = tape.relu(&c1.forward(tape, store, &residual)?);
        let h = tape.relu(&c2.forward(tape, store, &h)?);
        let attention = tape.tanh(&c3.forward(tape, store, &h)?);
        let ram = tape.hadamard(&attention, &bottleneck)?;
        let enhanced = tape.add(&tape.scale(&ram, T::from_f64_lossy(self.lambda)), &bottleneck)?;
        Ok(AttentionMaps { bottleneck, residual, attention, enhanced })
    }
}
