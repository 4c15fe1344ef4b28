use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::imageio::RgbImage;
use crate::tensor::{Tape, Tensor, Var};

use super::MetricError;

/// A frozen map from an RGB image to a flat feature vector.
pub trait FeatureExtractor {
    fn features(&self, image: &RgbImage) -> Vec<f64>;
}

/// Stand-in for a pre-trained classifier: `depth` stages of a fixed-seed
/// 3x3 convolution, ReLU and 2x2 average pooling.
#[derive(Clone, Debug)]
pub struct RandomConvExtractor {
    kernels: Vec<Tensor<f64>>,
}

impl RandomConvExtractor {
    pub const DEFAULT_SEED: u64 = 0x5eed;

    pub fn new(depth: usize, channels: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut kernels = Vec::with_capacity(depth);
        let mut cin = 3;
        for _ in 0..depth {
            let std = (2.0 / (cin * 9) as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("positive std");
            kernels.push(Tensor::from_fn(&[channels, cin, 3, 3], |_| normal.sample(&mut rng)));
            cin = channels;
        }
        RandomConvExtractor { kernels }
    }

    pub fn depth(&self) -> usize {
        self.kernels.len()
    }
}

impl Default for RandomConvExtractor {
    fn default() -> Self {
        Self::new(3, 16, Self::DEFAULT_SEED)
    }
}

/// 2x2 average pooling with stride 2; an odd trailing row or column is dropped.
fn avg_pool2(t: &Tensor<f64>) -> Tensor<f64> {
    let [n, c, h, w] = t.dims4("avg_pool2").expect("4-d feature map");
    let (oh, ow) = (h / 2, w / 2);
    if oh == 0 || ow == 0 {
        return t.clone();
    }
    let d = t.data();
    Tensor::from_fn(&[n, c, oh, ow], |i| {
        let (plane, rest) = (i / (oh * ow), i % (oh * ow));
        let (y, x) = (2 * (rest / ow), 2 * (rest % ow));
        let at = |dy: usize, dx: usize| d[(plane * h + y + dy) * w + x + dx];
        0.25 * (at(0, 0) + at(0, 1) + at(1, 0) + at(1, 1))
    })
}

impl FeatureExtractor for RandomConvExtractor {
    fn features(&self, image: &RgbImage) -> Vec<f64> {
        let tape = Tape::inference();
        let mut x = image.to_tensor::<f64>().map(|v| v * 255.0);
        for k in &self.kernels {
            let y = tape
                .conv2d(&Var::constant(x), &Var::constant(k.clone()), None, 1, 1)
                .expect("kernel channels match by construction");
            x = avg_pool2(tape.relu(&y).value());
        }
        x.to_vec()
    }
}

fn mean_abs_diff(a: &[f64], b: &[f64]) -> Result<f64, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::Shape(format!("{} vs {} features", a.len(), b.len())));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

/// `(E_hr_bic, E_hr_sr)`: mean absolute feature differences.
pub fn rcir_parts(
    hr: &RgbImage,
    sr: &RgbImage,
    bicubic: &RgbImage,
    phi: &dyn FeatureExtractor,
) -> Result<(f64, f64), MetricError> {
    for (name, img) in [("sr", sr), ("bicubic", bicubic)] {
        if (img.width(), img.height()) != (hr.width(), hr.height()) {
            return Err(MetricError::Shape(format!(
                "{name} is {}x{}, reference is {}x{}",
                img.width(),
                img.height(),
                hr.width(),
                hr.height()
            )));
        }
    }
    let f_hr = phi.features(hr);
    let e_bic = mean_abs_diff(&f_hr, &phi.features(bicubic))?;
    let e_sr = mean_abs_diff(&f_hr, &phi.features(sr))?;
    Ok((e_bic, e_sr))
}

/// Relative content increasing rate `1 - E_hr_sr / E_hr_bic`.
pub fn rcir(hr: &RgbImage, sr: &RgbImage, bicubic: &RgbImage, phi: &dyn FeatureExtractor) -> Result<f64, MetricError> {
    let (e_bic, e_sr) = rcir_parts(hr, sr, bicubic, phi)?;
    if e_bic == 0.0 {
        return Err(MetricError::Degenerate);
    }
    Ok(1.0 - e_sr / e_bic)
}
