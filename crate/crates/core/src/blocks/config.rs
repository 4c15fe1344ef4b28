use crate::kv::{KvError, KvMap};

use super::ModelError;

/// Full network topology. Conv kernels are He-normal initialized from `seed`
/// (the reconstruction conv scaled by 0.1), biases start at zero, PReLU slopes
/// at 0.25 and dense edge weights at 1.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkConfig {
    pub primary_channels: usize,
    pub growth_rate: usize,
    /// Dense layers per group; the length is the group count.
    pub dense_layers: Vec<usize>,
    /// Width of the 1x1 conv inside each dense layer, as a multiple of the growth rate.
    pub dense_bottleneck_factor: usize,
    pub lambda: f64,
    pub global_bottleneck_channels: usize,
    pub scale_factor: usize,
    /// Learnable edge weights (weighted dense block) instead of plain concatenation.
    pub weighted_dense: bool,
    /// Spatial attention after each block; without it the group emits the bottleneck output.
    pub attention: bool,
    /// Residual deconvolution (deconv + nearest/1x1 path) instead of deconvolution alone.
    pub residual_deconv: bool,
    pub seed: u64,
}

const KEYS: &[&str] = &[
    "primary_channels",
    "growth_rate",
    "dense_layers",
    "dense_bottleneck_factor",
    "lambda",
    "global_bottleneck_channels",
    "scale_factor",
    "weighted_dense",
    "attention",
    "residual_deconv",
    "seed",
];

impl Default for NetworkConfig {
    fn default() -> Self {
        Self::full()
    }
}

impl NetworkConfig {
    /// The full 4x model: 32 primary channels, G = 32, groups of 6/12/48/32
    /// dense layers, lambda 0.5 and a 256-channel global bottleneck.
    pub fn full() -> Self {
        NetworkConfig {
            primary_channels: 32,
            growth_rate: 32,
            dense_layers: vec![6, 12, 48, 32],
            dense_bottleneck_factor: 4,
            lambda: 0.5,
            global_bottleneck_channels: 256,
            scale_factor: 4,
            weighted_dense: true,
            attention: true,
            residual_deconv: true,
            seed: 0,
        }
    }

    /// Lightweight model used for ablations: groups of 6/10/14/10 dense layers.
    pub fn lightweight(growth_rate: usize) -> Self {
        NetworkConfig { growth_rate, dense_layers: vec![6, 10, 14, 10], ..Self::full() }
    }

    /// Desk-scale model: two groups of three dense layers, G = 8.
    pub fn tiny() -> Self {
        NetworkConfig {
            primary_channels: 16,
            growth_rate: 8,
            dense_layers: vec![3, 3],
            dense_bottleneck_factor: 2,
            global_bottleneck_channels: 32,
            ..Self::full()
        }
    }

    /// Smallest meaningful model (one group, two dense layers, G = 4) for gradient checks.
    pub fn miniature() -> Self {
        NetworkConfig {
            primary_channels: 4,
            growth_rate: 4,
            dense_layers: vec![2],
            dense_bottleneck_factor: 1,
            global_bottleneck_channels: 4,
            ..Self::full()
        }
    }

    pub fn groups(&self) -> usize {
        self.dense_layers.len()
    }

    pub fn upsample_stages(&self) -> usize {
        self.scale_factor.trailing_zeros() as usize
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |msg: String| Err(ModelError::Config(msg));
        if self.primary_channels == 0 || self.growth_rate == 0 {
            return fail("primary_channels and growth_rate must be positive".into());
        }
        if self.dense_layers.is_empty() {
            return fail("at least one dense group is required".into());
        }
        if self.dense_bottleneck_factor == 0 || self.global_bottleneck_channels == 0 {
            return fail("bottleneck widths must be positive".into());
        }
        if !self.scale_factor.is_power_of_two() {
            return fail(format!("scale_factor {} is not a power of two", self.scale_factor));
        }
        if !self.lambda.is_finite() {
            return fail(format!("lambda {} is not finite", self.lambda));
        }
        Ok(())
    }

    /// Channel counts at every junction, predicted without running the network.
    pub fn channel_plan(&self) -> ChannelPlan {
        let mut group_inputs = Vec::new();
        let mut block_outputs = Vec::new();
        let mut group_outputs = Vec::new();
        let mut c = self.primary_channels;
        for &layers in &self.dense_layers {
            group_inputs.push(c);
            block_outputs.push(c + layers * self.growth_rate);
            c *= 2;
            group_outputs.push(c);
        }
        ChannelPlan {
            primary: self.primary_channels,
            group_inputs,
            block_outputs,
            group_outputs,
            global_bottleneck: self.global_bottleneck_channels,
            output: 3,
        }
    }

    pub fn to_kv(&self) -> KvMap {
        let mut m = KvMap::new();
        let list: Vec<String> = self.dense_layers.iter().map(|n| n.to_string()).collect();
        m.set("primary_channels", self.primary_channels);
        m.set("growth_rate", self.growth_rate);
        m.set("dense_layers", list.join(","));
        m.set("dense_bottleneck_factor", self.dense_bottleneck_factor);
        m.set("lambda", self.lambda);
        m.set("global_bottleneck_channels", self.global_bottleneck_channels);
        m.set("scale_factor", self.scale_factor);
        m.set("weighted_dense", self.weighted_dense);
        m.set("attention", self.attention);
        m.set("residual_deconv", self.residual_deconv);
        m.set("seed", self.seed);
        m
    }

    /// Reads a config; keys absent from `map` keep the values of `base`.
    pub fn from_kv(map: &KvMap, base: &NetworkConfig) -> Result<Self, ModelError> {
        map.check_keys(KEYS)?;
        let mut c = base.clone();
        macro_rules! read {
            ($field:ident) => {
                if let Some(v) = map.parse_value(stringify!($field))? {
                    c.$field = v;
                }
            };
        }
        read!(primary_channels);
        read!(growth_rate);
        read!(dense_bottleneck_factor);
        read!(lambda);
        read!(global_bottleneck_channels);
        read!(scale_factor);
        read!(weighted_dense);
        read!(attention);
        read!(residual_deconv);
        read!(seed);
        if let Some(v) = map.parse_list("dense_layers")? {
            c.dense_layers = v;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn parse(text: &str) -> Result<Self, ModelError> {
        Self::from_kv(&KvMap::parse(text)?, &Self::full())
    }
}

impl From<KvError> for ModelError {
    fn from(e: KvError) -> Self {
        ModelError::Config(e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChannelPlan {
    pub primary: usize,
    /// Channels entering each group (the dense block head `x_0`).
    pub group_inputs: Vec<usize>,
    /// Channels of each dense block output, `C_in + L * G`.
    pub block_outputs: Vec<usize>,
    /// Channels after concatenating the group input with its enhanced features.
    pub group_outputs: Vec<usize>,
    pub global_bottleneck: usize,
    pub output: usize,
}
