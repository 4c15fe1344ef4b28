use crate::blocks::{ModelError, Network};
use crate::tensor::Real;

use super::RgbImage;

/// Splits large inputs into `tile x tile` cores, each run with `overlap` extra
/// pixels of context on every side; only the core of each output is kept.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TileOptions {
    pub tile: usize,
    pub overlap: usize,
}

impl Default for TileOptions {
    fn default() -> Self {
        TileOptions { tile: 64, overlap: 8 }
    }
}

fn image_err(e: super::ImageError) -> ModelError {
    ModelError::Image(e.to_string())
}

/// Full-image super-resolution. The result is clamped to [0, 1].
pub fn super_resolve<T: Real>(net: &Network<T>, lr: &RgbImage) -> Result<RgbImage, ModelError> {
    let out = net.infer(&lr.to_tensor())?;
    Ok(RgbImage::from_tensor(&out, 0).map_err(image_err)?.clamped())
}

/// `(core_start, core_len, region_start, region_len)` along one axis.
fn spans(len: usize, tile: usize, overlap: usize) -> Vec<(usize, usize, usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < len {
        let core = tile.min(len - start);
        let lo = start.saturating_sub(overlap);
        let hi = (start + core + overlap).min(len);
        out.push((start, core, lo, hi - lo));
        start += core;
    }
    out
}

pub fn super_resolve_tiled<T: Real>(
    net: &Network<T>,
    lr: &RgbImage,
    opts: TileOptions,
) -> Result<RgbImage, ModelError> {
    if opts.tile == 0 {
        return Err(ModelError::Config("tile size must be positive".into()));
    }
    if lr.width() <= opts.tile && lr.height() <= opts.tile {
        return super_resolve(net, lr);
    }
    let s = net.config().scale_factor;
    let (oh, ow) = (lr.height() * s, lr.width() * s);
    let mut data = vec![0.0f32; 3 * oh * ow];
    for &(cy, ch, ry, rh) in &spans(lr.height(), opts.tile, opts.overlap) {
        for &(cx, cw, rx, rw) in &spans(lr.width(), opts.tile, opts.overlap) {
            let region = lr.crop(ry, rx, rh, rw).map_err(image_err)?;
            let sr = super_resolve(net, &region)?;
            let (dy, dx) = ((cy - ry) * s, (cx - rx) * s);
            for c in 0..3 {
                for y in 0..ch * s {
                    for x in 0..cw * s {
                        data[(c * oh + cy * s + y) * ow + cx * s + x] = sr.get(c, dy + y, dx + x);
                    }
                }
            }
        }
    }
    RgbImage::new(ow, oh, data).map_err(image_err)
}
