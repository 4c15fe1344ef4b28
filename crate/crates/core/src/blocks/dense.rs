use rand::Rng;

use crate::tensor::{ParamId, ParamStore, Real, Tape, Tensor, Var};

use super::layers::Conv;
use super::ModelError;

/// Dense layer `l` (1-based): ReLU, 1x1 conv, 3x3 conv over the (optionally
/// weighted) concatenation of its `l` predecessors, producing `G` channels.
#[derive(Clone, Debug)]
pub struct DenseLayer {
    pub index: usize,
    pub squeeze: Conv,
    pub conv: Conv,
    /// One scalar per predecessor `x_0 .. x_{l-1}`; `None` for a plain dense layer.
    pub edge_weights: Option<Vec<ParamId>>,
    input_channels: usize,
}

impl DenseLayer {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        rng: &mut impl Rng,
        name: &str,
        index: usize,
        head_channels: usize,
        growth_rate: usize,
        bottleneck_width: usize,
        weighted: bool,
    ) -> Result<Self, ModelError> {
        let input_channels = head_channels + (index - 1) * growth_rate;
        let squeeze = Conv::new(store, rng, &format!("{name}.squeeze"), input_channels, bottleneck_width, 1)?;
        let conv = Conv::new(store, rng, &format!("{name}.conv"), bottleneck_width, growth_rate, 3)?;
        let edge_weights = if weighted {
            let ids = (0..index)
                .map(|i| store.add(format!("{name}.omega{i}"), Tensor::scalar(T::one())))
                .collect::<Result<Vec<_>, _>>()?;
            Some(ids)
        } else {
            None
        };
        Ok(DenseLayer { index, squeeze, conv, edge_weights, input_channels })
    }

    pub fn forward<T: Real>(
        &self,
        tape: &Tape<T>,
        store: &ParamStore<T>,
        features: &[Var<T>],
    ) -> Result<Var<T>, ModelError> {
        if features.len() != self.index {
            return Err(ModelError::FeatureCount { expected: self.index, got: features.len() });
        }
        let weighted: Vec<Var<T>> = match &self.edge_weights {
            Some(ids) => features
                .iter()
                .zip(ids)
                .map(|(x, &id)| tape.mul_scalar(x, &tape.param(store, id)))
                .collect::<Result<_, _>>()?,
            None => features.to_vec(),
        };
        let refs: Vec<&Var<T>> = weighted.iter().collect();
        let stacked = tape.concat_channels(&refs)?;
        if stacked.shape()[1] != self.input_channels {
            return Err(ModelError::Channels {
                at: "dense layer input",
                expected: self.input_channels,
                got: stacked.shape()[1],
            });
        }
        let h = tape.relu(&stacked);
        let h = self.squeeze.forward(tape, store, &h)?;
        self.conv.forward(tape, store, &h)
    }
}

/// A stack of dense layers; the output concatenates the head and every layer output.
#[derive(Clone, Debug)]
pub struct WeightedDenseBlock {
    pub head_channels: usize,
    pub growth_rate: usize,
    pub layers: Vec<DenseLayer>,
}

impl WeightedDenseBlock {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        rng: &mut impl Rng,
        name: &str,
        head_channels: usize,
        growth_rate: usize,
        num_layers: usize,
        bottleneck_width: usize,
        weighted: bool,
    ) -> Result<Self, ModelError> {
        let layers = (1..=num_layers)
            .map(|l| {
                DenseLayer::new(
                    store,
                    rng,
                    &format!("{name}.layer{l}"),
                    l,
                    head_channels,
                    growth_rate,
                    bottleneck_width,
                    weighted,
                )
            })
            .collect::<Result<_, _>>()?;
        Ok(WeightedDenseBlock { head_channels, growth_rate, layers })
    }

    pub fn out_channels(&self) -> usize {
        self.head_channels + self.layers.len() * self.growth_rate
    }

    pub fn forward<T: Real>(&self, tape: &Tape<T>, store: &ParamStore<T>, head: &Var<T>) -> Result<Var<T>, ModelError> {
        let c = head.value().dims4("dense block")?[1];
        if c != self.head_channels {
            return Err(ModelError::Channels { at: "dense block head", expected: self.head_channels, got: c });
        }
        if self.layers.is_empty() {
            return Ok(head.clone());
        }
        let mut features = vec![head.clone()];
        for layer in &self.layers {
            let x = layer.forward(tape, store, &features)?;
            features.push(x);
        }
        let refs: Vec<&Var<T>> = features.iter().collect();
        Ok(tape.concat_channels(&refs)?)
    }

    /// Row `l - 1` holds the edge weights of dense layer `l`.
    pub fn weight_rows<T: Real>(&self, store: &ParamStore<T>) -> Vec<Vec<f64>> {
        self.layers
            .iter()
            .map(|layer| match &layer.edge_weights {
                Some(ids) => ids.iter().map(|&id| store.value(id).item().as_f64()).collect(),
                None => vec![1.0; layer.index],
            })
            .collect()
    }
}
