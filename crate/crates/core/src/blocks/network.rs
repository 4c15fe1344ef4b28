use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::tensor::{ParamId, ParamStore, Real, Tape, Tensor, Var};

use super::attention::SpatialAttention;
use super::dense::WeightedDenseBlock;
use super::layers::{prelu_slope, Conv};
use super::upsample::ResidualDeconvStage;
use super::{ModelError, NetworkConfig};

/// One feature-transformation group: dense block, then bottleneck + attention,
/// then concatenation of the group input with the enhanced features.
#[derive(Clone, Debug)]
pub struct Group {
    pub block: WeightedDenseBlock,
    pub attention: SpatialAttention,
}

/// Shapes observed at each junction during a forward pass.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ForwardTrace {
    pub primary: Vec<usize>,
    pub group_inputs: Vec<Vec<usize>>,
    pub block_outputs: Vec<Vec<usize>>,
    pub group_outputs: Vec<Vec<usize>>,
    pub global_bottleneck: Vec<usize>,
    pub stages: Vec<Vec<usize>>,
    pub output: Vec<usize>,
}

/// Lower-triangular matrix of dense-block edge weights; row `l - 1` has `l` entries.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMatrix {
    pub group: usize,
    pub learnable: bool,
    pub rows: Vec<Vec<f64>>,
}

/// Initial weight scale of the reconstruction conv relative to He-normal.
pub const RECONSTRUCTION_INIT_SCALE: f64 = 0.1;

#[derive(Clone, Debug)]
pub struct Network<T> {
    config: NetworkConfig,
    store: ParamStore<T>,
    primary: Conv,
    primary_slope: ParamId,
    groups: Vec<Group>,
    global_bottleneck: Conv,
    stages: Vec<ResidualDeconvStage>,
    reconstruction: Conv,
}

impl<T: Real> Network<T> {
    /// Builds and initializes the network. All topology checks happen here.
    pub fn new(config: NetworkConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let plan = config.channel_plan();

        let primary = Conv::new(&mut store, &mut rng, "primary.conv", 3, config.primary_channels, 3)?;
        let primary_slope = prelu_slope(&mut store, "primary.prelu")?;

        let width = config.dense_bottleneck_factor * config.growth_rate;
        let mut groups = Vec::with_capacity(config.groups());
        for (g, &layers) in config.dense_layers.iter().enumerate() {
            let c = plan.group_inputs[g];
            let name = format!("group{}", g + 1);
            let block = WeightedDenseBlock::new(
                &mut store,
                &mut rng,
                &format!("{name}.wdb"),
                c,
                config.growth_rate,
                layers,
                width,
                config.weighted_dense,
            )?;
            let attention = SpatialAttention::new(
                &mut store,
                &mut rng,
                &format!("{name}.sa"),
                c,
                block.out_channels(),
                config.lambda,
                config.attention,
            )?;
            groups.push(Group { block, attention });
        }

        let trunk = *plan.group_outputs.last().expect("validated non-empty");
        let b = config.global_bottleneck_channels;
        let global_bottleneck = Conv::new(&mut store, &mut rng, "global_bottleneck", trunk, b, 1)?;
        let stages = (1..=config.upsample_stages())
            .map(|s| ResidualDeconvStage::new(&mut store, &mut rng, &format!("upsample{s}"), b, config.residual_deconv))
            .collect::<Result<_, _>>()?;
        let reconstruction =
            Conv::with_init_scale(&mut store, &mut rng, "reconstruction", b, 3, 3, RECONSTRUCTION_INIT_SCALE)?;

        Ok(Network { config, store, primary, primary_slope, groups, global_bottleneck, stages, reconstruction })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.store
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn stages(&self) -> &[ResidualDeconvStage] {
        &self.stages
    }

    /// Maps `[N, 3, h, w]` in [0, 1] to `[N, 3, s*h, s*w]`. The output is not clamped.
    pub fn forward(&self, tape: &Tape<T>, lr: &Var<T>) -> Result<Var<T>, ModelError> {
        self.run(tape, &self.store, lr, None)
    }

    /// Forward pass reading parameter values from `store`, which must have been
    /// cloned from [`Network::params`] (same names, order and shapes).
    pub fn forward_with_params(
        &self,
        tape: &Tape<T>,
        store: &ParamStore<T>,
        lr: &Var<T>,
    ) -> Result<Var<T>, ModelError> {
        if store.len() != self.store.len() {
            return Err(ModelError::Config(format!(
                "parameter store has {} entries, network has {}",
                store.len(),
                self.store.len()
            )));
        }
        self.run(tape, store, lr, None)
    }

    pub fn forward_traced(&self, tape: &Tape<T>, lr: &Var<T>) -> Result<(Var<T>, ForwardTrace), ModelError> {
        let mut trace = ForwardTrace::default();
        let out = self.run(tape, &self.store, lr, Some(&mut trace))?;
        Ok((out, trace))
    }

    /// Forward pass without recording gradients.
    pub fn infer(&self, lr: &Tensor<T>) -> Result<Tensor<T>, ModelError> {
        let tape = Tape::inference();
        Ok(self.forward(&tape, &Var::constant(lr.clone()))?.into_value())
    }

    fn run(
        &self,
        tape: &Tape<T>,
        store: &ParamStore<T>,
        lr: &Var<T>,
        mut trace: Option<&mut ForwardTrace>,
    ) -> Result<Var<T>, ModelError> {
        let c = lr.value().dims4("network input")?[1];
        if c != 3 {
            return Err(ModelError::Channels { at: "network input", expected: 3, got: c });
        }
        let mut record = |f: &mut dyn FnMut(&mut ForwardTrace)| {
            if let Some(t) = trace.as_deref_mut() {
                f(t)
            }
        };

        let x = self.primary.forward(tape, store, lr)?;
        let mut x = tape.prelu(&x, &tape.param(store, self.primary_slope))?;
        record(&mut |t| t.primary = x.shape().to_vec());

        for group in &self.groups {
            let block_out = group.block.forward(tape, store, &x)?;
            let enhanced = group.attention.forward(tape, store, &x, &block_out)?;
            let out = tape.concat_channels(&[&x, &enhanced])?;
            record(&mut |t| {
                t.group_inputs.push(x.shape().to_vec());
                t.block_outputs.push(block_out.shape().to_vec());
                t.group_outputs.push(out.shape().to_vec());
            });
            x = out;
        }

        let mut x = tape.relu(&self.global_bottleneck.forward(tape, store, &x)?);
        record(&mut |t| t.global_bottleneck = x.shape().to_vec());
        for stage in &self.stages {
            x = stage.forward(tape, store, &x)?;
            record(&mut |t| t.stages.push(x.shape().to_vec()));
        }
        let out = self.reconstruction.forward(tape, store, &x)?;
        record(&mut |t| t.output = out.shape().to_vec());
        Ok(out)
    }

    pub fn weight_matrices(&self) -> Vec<WeightMatrix> {
        self.groups
            .iter()
            .enumerate()
            .map(|(g, group)| WeightMatrix {
                group: g + 1,
                learnable: self.config.weighted_dense,
                rows: group.block.weight_rows(&self.store),
            })
            .collect()
    }

    /// Same topology and values in another precision.
    pub fn cast<U: Real>(&self) -> Network<U> {
        Network {
            config: self.config.clone(),
            store: self.store.cast(),
            primary: self.primary.clone(),
            primary_slope: self.primary_slope,
            groups: self.groups.clone(),
            global_bottleneck: self.global_bottleneck.clone(),
            stages: self.stages.clone(),
            reconstruction: self.reconstruction.clone(),
        }
    }
}

/// Plain-text rendering: one section per group, one row per dense layer.
pub fn format_weight_matrices(matrices: &[WeightMatrix]) -> String {
    let mut out = String::new();
    for m in matrices {
        let kind = if m.learnable { "learned" } else { "fixed" };
        let _ = writeln!(out, "# group {} ({} layers, {kind})", m.group, m.rows.len());
        for row in &m.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
            let _ = writeln!(out, "{}", cells.join("\t"));
        }
        out.push('\n');
    }
    out
}
