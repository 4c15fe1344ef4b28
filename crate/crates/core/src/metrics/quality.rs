use crate::imageio::RgbImage;
use crate::tensor::{Real, Tensor};

use super::MetricError;

/// Side of the Gaussian SSIM window.
pub const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const PEAK: f64 = 255.0;

/// Studio-swing luma from 8-bit-range RGB.
pub fn luma(r: f64, g: f64, b: f64) -> f64 {
    (65.481 * r + 128.553 * g + 24.966 * b) / 255.0 + 16.0
}

/// Luminance plane with values on the [0, 255] scale.
#[derive(Clone, Debug, PartialEq)]
pub struct YImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl YImage {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self, MetricError> {
        if height == 0 || width == 0 || data.len() != height * width {
            return Err(MetricError::Shape(format!(
                "{height}x{width} plane needs {} samples, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(YImage { height, width, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    fn cropped(&self, crop: usize) -> Result<YImage, MetricError> {
        if 2 * crop >= self.height || 2 * crop >= self.width {
            return Err(MetricError::Crop { crop, h: self.height, w: self.width });
        }
        let (h, w) = (self.height - 2 * crop, self.width - 2 * crop);
        let mut data = Vec::with_capacity(h * w);
        for y in 0..h {
            let row = (y + crop) * self.width + crop;
            data.extend_from_slice(&self.data[row..row + w]);
        }
        Ok(YImage { height: h, width: w, data })
    }
}

pub fn rgb_to_y(image: &RgbImage) -> YImage {
    let (r, g, b) = (image.plane(0), image.plane(1), image.plane(2));
    let data = (0..r.len()).map(|i| luma(r[i] as f64 * 255.0, g[i] as f64 * 255.0, b[i] as f64 * 255.0)).collect();
    YImage { height: image.height(), width: image.width(), data }
}

/// Luma of batch item `index` of a `[N, C, H, W]` tensor holding values in [0, 1].
pub fn y_from_tensor<T: Real>(t: &Tensor<T>, index: usize) -> Result<YImage, MetricError> {
    let [n, c, h, w] = t.dims4("rgb_to_y").map_err(|e| MetricError::Shape(e.to_string()))?;
    if c != 3 {
        return Err(MetricError::Channels(c));
    }
    if index >= n {
        return Err(MetricError::Shape(format!("batch item {index} of {n}")));
    }
    let plane = h * w;
    let base = index * 3 * plane;
    let d = t.data();
    let data = (0..plane)
        .map(|i| {
            let at = |k: usize| d[base + k * plane + i].as_f64() * 255.0;
            luma(at(0), at(1), at(2))
        })
        .collect();
    Ok(YImage { height: h, width: w, data })
}

fn same_shape(a: &YImage, b: &YImage) -> Result<(), MetricError> {
    if (a.height, a.width) != (b.height, b.width) {
        return Err(MetricError::Shape(format!("{}x{} vs {}x{}", a.height, a.width, b.height, b.width)));
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB over the interior left after removing
/// `border` pixels from every side. Identical inputs give `f64::INFINITY`.
pub fn psnr(a: &YImage, b: &YImage, border: usize) -> Result<f64, MetricError> {
    same_shape(a, b)?;
    let (a, b) = (a.cropped(border)?, b.cropped(border)?);
    let sse: f64 = a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum();
    let mse = sse / a.data.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (PEAK * PEAK / mse).log10())
}

fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut taps = [0.0; SSIM_WINDOW];
    for (i, t) in taps.iter_mut().enumerate() {
        let d = i as f64 - r;
        *t = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let total: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= total);
    taps
}

/// Separable valid-mode Gaussian filter of an `h x w` plane.
fn filter_valid(src: &[f64], h: usize, w: usize, taps: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (oh, ow) = (h + 1 - SSIM_WINDOW, w + 1 - SSIM_WINDOW);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = taps.iter().enumerate().map(|(k, t)| t * src[y * w + x + k]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps.iter().enumerate().map(|(k, t)| t * rows[(y + k) * ow + x]).sum();
        }
    }
    out
}

/// Mean structural similarity over all valid 11x11 Gaussian windows
/// (sigma 1.5, K1 0.01, K2 0.03, dynamic range 255).
pub fn ssim(a: &YImage, b: &YImage, border: usize) -> Result<f64, MetricError> {
    same_shape(a, b)?;
    let (a, b) = (a.cropped(border)?, b.cropped(border)?);
    let (h, w) = (a.height, a.width);
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(MetricError::TooSmall { h, w, window: SSIM_WINDOW });
    }
    let taps = gaussian_taps();
    let prod = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| p * q).collect() };
    let mu_a = filter_valid(&a.data, h, w, &taps);
    let mu_b = filter_valid(&b.data, h, w, &taps);
    let e_aa = filter_valid(&prod(&a.data, &a.data), h, w, &taps);
    let e_bb = filter_valid(&prod(&b.data, &b.data), h, w, &taps);
    let e_ab = filter_valid(&prod(&a.data, &b.data), h, w, &taps);
    let c1 = (0.01 * PEAK).powi(2);
    let c2 = (0.03 * PEAK).powi(2);
    let mut total = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let var_a = e_aa[i] - ma * ma;
        let var_b = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
    }
    Ok(total / mu_a.len() as f64)
}
