//! Separable bicubic resampling (Keys kernel, a = -0.5).
//!
//! Coordinates are area aligned: output pixel `i` samples the source at
//! `(i + 0.5) * in / out - 0.5`. When shrinking, the kernel is stretched by the
//! reduction factor so it also acts as an anti-aliasing filter. Taps falling
//! outside the image are clamped to the nearest edge pixel.

use super::{ImageError, RgbImage};

pub const CUBIC_A: f64 = -0.5;

pub fn cubic(x: f64) -> f64 {
    let a = CUBIC_A;
    let x = x.abs();
    if x <= 1.0 {
        ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
    } else {
        0.0
    }
}

/// Source indices and normalized weights for every output position along one axis.
struct AxisTaps {
    taps: Vec<Vec<(usize, f64)>>,
}

impl AxisTaps {
    fn new(in_len: usize, out_len: usize) -> Self {
        let shrink = in_len as f64 / out_len as f64;
        let stretch = shrink.max(1.0);
        let support = 2.0 * stretch;
        let taps = (0..out_len)
            .map(|i| {
                // (i + 0.5) * in / out - 0.5, kept as one rounding for exact periodicity.
                let center = ((2 * i + 1) * in_len) as f64 / (2 * out_len) as f64 - 0.5;
                let first = (center - support).floor() as isize;
                let last = (center + support).ceil() as isize;
                let mut row: Vec<(usize, f64)> = Vec::new();
                for j in first..=last {
                    let w = cubic((center - j as f64) / stretch);
                    if w == 0.0 {
                        continue;
                    }
                    let idx = j.clamp(0, in_len as isize - 1) as usize;
                    match row.last_mut() {
                        Some((last_idx, acc)) if *last_idx == idx => *acc += w,
                        _ => row.push((idx, w)),
                    }
                }
                let total: f64 = row.iter().map(|(_, w)| w).sum();
                row.iter_mut().for_each(|(_, w)| *w /= total);
                row
            })
            .collect();
        AxisTaps { taps }
    }
}

/// Resamples one `h x w` plane to `out_h x out_w`.
pub fn resample_plane(src: &[f32], h: usize, w: usize, out_h: usize, out_w: usize) -> Vec<f32> {
    assert_eq!(src.len(), h * w);
    let horizontal: Vec<f64> = if out_w == w {
        src.iter().map(|&v| v as f64).collect()
    } else {
        let taps = AxisTaps::new(w, out_w);
        let mut out = Vec::with_capacity(h * out_w);
        for row in src.chunks(w) {
            for t in &taps.taps {
                out.push(t.iter().map(|&(j, wt)| row[j] as f64 * wt).sum());
            }
        }
        out
    };
    if out_h == h {
        return horizontal.into_iter().map(|v| v as f32).collect();
    }
    let taps = AxisTaps::new(h, out_h);
    let mut out = vec![0.0f32; out_h * out_w];
    for (y, t) in taps.taps.iter().enumerate() {
        for x in 0..out_w {
            let v: f64 = t.iter().map(|&(j, wt)| horizontal[j * out_w + x] * wt).sum();
            out[y * out_w + x] = v as f32;
        }
    }
    out
}

/// Bicubic resize to `out_h x out_w`. Values are not clamped.
pub fn bicubic_resample(image: &RgbImage, out_h: usize, out_w: usize) -> Result<RgbImage, ImageError> {
    if out_h == 0 || out_w == 0 {
        return Err(ImageError::Shape(format!("target size {out_h}x{out_w} must be positive")));
    }
    let (h, w) = (image.height(), image.width());
    let mut data = Vec::with_capacity(3 * out_h * out_w);
    for c in 0..3 {
        data.extend(resample_plane(image.plane(c), h, w, out_h, out_w));
    }
    RgbImage::new(out_w, out_h, data)
}

/// Crops the bottom/right edges so both extents are multiples of `scale`.
pub fn modcrop(image: &RgbImage, scale: usize) -> Result<RgbImage, ImageError> {
    let h = image.height() - image.height() % scale;
    let w = image.width() - image.width() % scale;
    if h == 0 || w == 0 {
        return Err(ImageError::Shape(format!(
            "{}x{} image is smaller than the scale factor {scale}",
            image.width(),
            image.height()
        )));
    }
    image.crop(0, 0, h, w)
}

/// Low-resolution input synthesis: bicubic shrink by `scale`, clamped to [0, 1].
pub fn degrade(hr: &RgbImage, scale: usize) -> Result<RgbImage, ImageError> {
    if !hr.height().is_multiple_of(scale) || !hr.width().is_multiple_of(scale) {
        return Err(ImageError::Shape(format!(
            "{}x{} image is not divisible by scale {scale}",
            hr.width(),
            hr.height()
        )));
    }
    Ok(bicubic_resample(hr, hr.height() / scale, hr.width() / scale)?.clamped())
}

/// Bicubic baseline: enlarge by `scale`, clamped to [0, 1].
pub fn upscale_bicubic(lr: &RgbImage, scale: usize) -> Result<RgbImage, ImageError> {
    Ok(bicubic_resample(lr, lr.height() * scale, lr.width() * scale)?.clamped())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imageio::Dihedral;

    fn smooth(w: usize, h: usize) -> RgbImage {
        RgbImage::from_fn(w, h, |c, y, x| {
            let (fy, fx) = (y as f32 / h as f32, x as f32 / w as f32);
            0.5 + 0.3 * ((fx * 2.0 + c as f32) * 1.3).sin() * (fy * 2.5).cos()
        })
    }

    #[test]
    fn kernel_shape() {
        assert_eq!(cubic(0.0), 1.0);
        assert_eq!(cubic(1.0), 0.0);
        assert_eq!(cubic(2.0), 0.0);
        assert_eq!(cubic(-1.5), cubic(1.5));
        // Partition of unity at any phase.
        for k in 0..10 {
            let t = k as f64 / 10.0;
            let s: f64 = (-2..=2).map(|j| cubic(t - j as f64)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_stays_constant() {
        let img = RgbImage::filled(13, 9, [0.2, 0.5, 0.9]);
        for (oh, ow) in [(4, 5), (36, 52), (9, 13), (1, 1), (17, 3)] {
            let out = bicubic_resample(&img, oh, ow).unwrap();
            for c in 0..3 {
                let want = [0.2, 0.5, 0.9][c];
                assert!(out.plane(c).iter().all(|&v| (v - want).abs() < 1e-6));
            }
        }
    }

    #[test]
    fn identity_size_is_exact() {
        let img = smooth(11, 7);
        assert_eq!(bicubic_resample(&img, 7, 11).unwrap(), img);
    }

    fn max_gray_error(a: &RgbImage, b: &RgbImage, border: usize) -> f32 {
        let mut worst = 0.0f32;
        for c in 0..3 {
            for y in border..a.height() - border {
                for x in border..a.width() - border {
                    worst = worst.max((a.get(c, y, x) - b.get(c, y, x)).abs() * 255.0);
                }
            }
        }
        worst
    }

    #[test]
    fn down_then_up_recovers_a_smooth_image() {
        // A diagonal gradient spanning 64 gray levels: recovered everywhere,
        // including the clamped borders.
        let ramp = RgbImage::from_fn(128, 128, |c, y, x| 0.3 + 0.125 * (x + y) as f32 / 128.0 + 0.05 * c as f32);
        let rt = upscale_bicubic(&degrade(&ramp, 4).unwrap(), 4).unwrap();
        let worst = max_gray_error(&ramp, &rt, 0);
        assert!(worst < 1.0, "gradient: max error {worst} gray levels");

        // A low-frequency sinusoid: recovered away from the 4-pixel border where
        // edge clamping dominates.
        let wave = RgbImage::from_fn(128, 128, |c, y, x| {
            let (fy, fx) = (y as f32 / 128.0, x as f32 / 128.0);
            0.5 + 0.25 * (std::f32::consts::PI * (fx + 0.5 * fy + 0.2 * c as f32)).sin()
        });
        let rt = upscale_bicubic(&degrade(&wave, 4).unwrap(), 4).unwrap();
        let worst = max_gray_error(&wave, &rt, 4);
        assert!(worst < 1.0, "sinusoid: max error {worst} gray levels");
    }

    #[test]
    fn shift_equivariant_away_from_borders() {
        let img = RgbImage::from_fn(64, 48, |c, y, x| ((x * 7 + y * 13 + c * 5) % 23) as f32 / 23.0);
        let shifted = img.crop(8, 4, 40, 60).unwrap();
        let a = degrade(&img.crop(0, 0, 48, 64).unwrap(), 4).unwrap();
        let b = degrade(&shifted.crop(0, 0, 40, 60).unwrap(), 4).unwrap();
        // Source shift of (8, 4) pixels is an output shift of (2, 1).
        for c in 0..3 {
            for y in 3..8 {
                for x in 3..13 {
                    assert_eq!(a.get(c, y + 2, x + 1), b.get(c, y, x));
                }
            }
        }
        let up_a = bicubic_resample(&img, 96, 128).unwrap();
        let up_b = bicubic_resample(&img.crop(3, 5, 40, 50).unwrap(), 80, 100).unwrap();
        for c in 0..3 {
            for y in 8..70 {
                for x in 8..90 {
                    assert_eq!(up_a.get(c, y + 6, x + 10), up_b.get(c, y, x));
                }
            }
        }
    }

    #[test]
    fn degradation_commutes_with_dihedral_transforms() {
        let img = smooth(32, 24);
        for t in Dihedral::ALL {
            let a = degrade(&img.transform(t), 4).unwrap();
            let b = degrade(&img, 4).unwrap().transform(t);
            let worst = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f32::max);
            assert!(worst <= 1e-6, "{t:?}: {worst}");
        }
    }

    #[test]
    fn geometry_errors() {
        let img = smooth(10, 10);
        assert!(bicubic_resample(&img, 0, 3).is_err());
        assert!(degrade(&img, 4).is_err());
        assert_eq!(modcrop(&img, 4).unwrap().width(), 8);
        assert!(modcrop(&smooth(3, 3), 4).is_err());
    }
}
