use adrd_core::imageio::{degrade, upscale_bicubic, RgbImage};
use adrd_core::metrics::{
    add_gaussian_noise, gaussian_field, noisy_input, psnr, rcir, rgb_to_y, ssim, FeatureExtractor, NoiseTarget,
    RandomConvExtractor, YImage, NOISE_VARIANCES,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_plane(seed: u64, h: usize, w: usize) -> YImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    YImage::new(h, w, (0..h * w).map(|_| rng.random_range(16.0..235.0)).collect()).unwrap()
}

fn scene(w: usize, h: usize) -> RgbImage {
    RgbImage::from_fn(w, h, |c, y, x| {
        let (fy, fx) = (y as f32 / h as f32, x as f32 / w as f32);
        let edge = if fx + 0.3 * fy > 0.55 { 0.25 } else { 0.0 };
        (0.3 + edge + 0.2 * ((fx * 9.0 + c as f32).sin() * (fy * 7.0).cos())).clamp(0.0, 1.0)
    })
}

#[test]
fn psnr_matches_loop_oracle() {
    let (a, b) = (random_plane(1, 23, 31), random_plane(2, 23, 31));
    for border in [0, 3] {
        let mut sse = 0.0;
        let mut n = 0;
        for y in border..23 - border {
            for x in border..31 - border {
                sse += (a.get(y, x) - b.get(y, x)).powi(2);
                n += 1;
            }
        }
        let want = 10.0 * (255.0f64 * 255.0 / (sse / n as f64)).log10();
        assert!((psnr(&a, &b, border).unwrap() - want).abs() < 1e-9);
    }
}

/// Direct per-window SSIM with two-pass moments.
fn ssim_oracle(a: &YImage, b: &YImage) -> f64 {
    let mut g = [[0.0f64; 11]; 11];
    let mut total = 0.0;
    for (i, row) in g.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            *v = (-(di * di + dj * dj) / (2.0 * 1.5 * 1.5)).exp();
            total += *v;
        }
    }
    let (c1, c2) = ((0.01f64 * 255.0).powi(2), (0.03f64 * 255.0).powi(2));
    let (h, w) = (a.height(), a.width());
    let mut sum = 0.0;
    let mut count = 0;
    for y0 in 0..=h - 11 {
        for x0 in 0..=w - 11 {
            let win = |f: &dyn Fn(usize, usize) -> f64| {
                let mut s = 0.0;
                for (i, row) in g.iter().enumerate() {
                    for (j, gij) in row.iter().enumerate() {
                        s += gij / total * f(y0 + i, x0 + j);
                    }
                }
                s
            };
            let ma = win(&|y, x| a.get(y, x));
            let mb = win(&|y, x| b.get(y, x));
            let va = win(&|y, x| (a.get(y, x) - ma).powi(2));
            let vb = win(&|y, x| (b.get(y, x) - mb).powi(2));
            let cov = win(&|y, x| (a.get(y, x) - ma) * (b.get(y, x) - mb));
            sum += (2.0 * ma * mb + c1) * (2.0 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    sum / count as f64
}

#[test]
fn ssim_matches_sliding_window_oracle() {
    let a = rgb_to_y(&scene(29, 24));
    let noisy = rgb_to_y(&add_gaussian_noise(&scene(29, 24), 2e-3, 9).unwrap());
    for b in [&noisy, &random_plane(3, 24, 29)] {
        let got = ssim(&a, b, 0).unwrap();
        let want = ssim_oracle(&a, b);
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    }
}

#[test]
fn psnr_decreases_with_uniform_error() {
    let a = random_plane(4, 16, 16);
    let mut last = f64::INFINITY;
    for d in [0.5, 1.0, 2.0, 4.0, 8.0, 16.0] {
        let b = YImage::new(16, 16, a.data().iter().map(|v| v + d).collect()).unwrap();
        let p = psnr(&a, &b, 0).unwrap();
        assert!(p < last);
        last = p;
    }
}

#[test]
fn ssim_prefers_offsets_over_shuffles() {
    let a = rgb_to_y(&scene(48, 48));
    let shifted = YImage::new(48, 48, a.data().iter().map(|v| v + 5.0).collect()).unwrap();
    let mut perm: Vec<f64> = a.data().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in (1..perm.len()).rev() {
        perm.swap(i, rng.random_range(0..=i));
    }
    let shuffled = YImage::new(48, 48, perm).unwrap();
    assert!(ssim(&a, &shifted, 0).unwrap() > ssim(&a, &shuffled, 0).unwrap());
}

proptest! {
    #[test]
    fn metrics_are_symmetric(s1 in 0u64..1000, s2 in 0u64..1000) {
        let (a, b) = (random_plane(s1, 14, 15), random_plane(s2 + 1000, 14, 15));
        prop_assert_eq!(psnr(&a, &b, 1).unwrap(), psnr(&b, &a, 1).unwrap());
        prop_assert!((ssim(&a, &b, 0).unwrap() - ssim(&b, &a, 0).unwrap()).abs() < 1e-12);
    }
}

struct Pixels;

impl FeatureExtractor for Pixels {
    fn features(&self, image: &RgbImage) -> Vec<f64> {
        image.data().iter().map(|&v| v as f64).collect()
    }
}

struct Scaled<E>(E, f64);

impl<E: FeatureExtractor> FeatureExtractor for Scaled<E> {
    fn features(&self, image: &RgbImage) -> Vec<f64> {
        self.0.features(image).into_iter().map(|v| v * self.1).collect()
    }
}

#[test]
fn rcir_of_a_convex_blend_is_its_weight() {
    let hr = scene(32, 32);
    let bic = upscale_bicubic(&degrade(&hr, 4).unwrap(), 4).unwrap();
    for alpha in [0.0, 0.25, 0.6, 1.0] {
        let sr = RgbImage::new(
            32,
            32,
            hr.data()
                .iter()
                .zip(bic.data())
                .map(|(h, b)| (alpha * *h as f64 + (1.0 - alpha) * *b as f64) as f32)
                .collect(),
        )
        .unwrap();
        let s = rcir(&hr, &sr, &bic, &Pixels).unwrap();
        assert!((s - alpha).abs() < 1e-6, "alpha {alpha}: {s}");
    }
}

#[test]
fn rcir_ignores_feature_scale() {
    let hr = scene(32, 32);
    let bic = upscale_bicubic(&degrade(&hr, 4).unwrap(), 4).unwrap();
    let sr = add_gaussian_noise(&bic, 1e-4, 1).unwrap();
    let phi = RandomConvExtractor::default();
    let base = rcir(&hr, &sr, &bic, &phi).unwrap();
    let scaled = rcir(&hr, &sr, &bic, &Scaled(RandomConvExtractor::default(), 7.25)).unwrap();
    assert!((base - scaled).abs() < 1e-12);
    assert_eq!(rcir(&hr, &hr, &bic, &phi).unwrap(), 1.0);
    assert_eq!(rcir(&hr, &bic, &bic, &phi).unwrap(), 0.0);
}

#[test]
fn noise_has_the_requested_variance() {
    let gray = RgbImage::filled(256, 256, [0.5; 3]);
    for v in NOISE_VARIANCES.iter().chain(&[1e-3]) {
        let noisy = add_gaussian_noise(&gray, *v, 17).unwrap();
        let n = noisy.data().len() as f64;
        let mean = noisy.data().iter().map(|&x| x as f64).sum::<f64>() / n;
        let var = noisy.data().iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var / v - 1.0).abs() < 0.05, "variance {v}: sample {var}");
        let field = gaussian_field(256 * 256, *v, 17).unwrap();
        let fvar = field.iter().map(|x| x * x).sum::<f64>() / field.len() as f64;
        assert!((fvar / v - 1.0).abs() < 0.05);
    }
}

#[test]
fn bicubic_psnr_falls_as_noise_grows() {
    let hr = scene(64, 64);
    let mut last = f64::INFINITY;
    for v in NOISE_VARIANCES {
        let lr = noisy_input(&hr, 4, v, 42, NoiseTarget::Lr).unwrap();
        let up = upscale_bicubic(&lr, 4).unwrap().quantized();
        let p = psnr(&rgb_to_y(&hr), &rgb_to_y(&up), 4).unwrap();
        assert!(p < last, "{v}: {p} !< {last}");
        last = p;
    }
    let clean = degrade(&hr, 4).unwrap();
    let shrunk = noisy_input(&hr, 4, NOISE_VARIANCES[3], 42, NoiseTarget::Hr).unwrap();
    assert_eq!((shrunk.width(), shrunk.height()), (16, 16));
    assert_ne!(shrunk, clean);
}
