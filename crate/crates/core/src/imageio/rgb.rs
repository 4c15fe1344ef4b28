use std::path::Path;

use image::{ColorType, ImageEncoder, ImageReader};
use thiserror::Error;

use crate::tensor::{Real, Tensor};

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Decode { path: String, message: String },
    #[error("{path}: only 8-bit RGB PNG images are supported, found {found}")]
    Unsupported { path: String, found: String },
    #[error("{0}")]
    Shape(String),
}

/// The eight axis-aligned symmetries of a square grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dihedral {
    Identity,
    Rot90,
    Rot180,
    Rot270,
    FlipH,
    FlipV,
    /// Mirror across the main diagonal.
    Transpose,
    /// Mirror across the anti-diagonal.
    AntiTranspose,
}

impl Dihedral {
    pub const ALL: [Dihedral; 8] = [
        Dihedral::Identity,
        Dihedral::Rot90,
        Dihedral::Rot180,
        Dihedral::Rot270,
        Dihedral::FlipH,
        Dihedral::FlipV,
        Dihedral::Transpose,
        Dihedral::AntiTranspose,
    ];

    /// A horizontal flip (optional) followed by a clockwise rotation by `quarter_turns * 90`.
    pub fn compose(hflip: bool, quarter_turns: u8) -> Self {
        use Dihedral::*;
        match (hflip, quarter_turns % 4) {
            (false, 0) => Identity,
            (false, 1) => Rot90,
            (false, 2) => Rot180,
            (false, _) => Rot270,
            (true, 0) => FlipH,
            (true, 1) => AntiTranspose,
            (true, 2) => FlipV,
            (true, _) => Transpose,
        }
    }

    fn swaps_axes(self) -> bool {
        matches!(self, Dihedral::Rot90 | Dihedral::Rot270 | Dihedral::Transpose | Dihedral::AntiTranspose)
    }

    /// Source pixel `(y, x)` for output pixel `(oy, ox)` of an `h x w` source.
    fn source(self, oy: usize, ox: usize, h: usize, w: usize) -> (usize, usize) {
        use Dihedral::*;
        match self {
            Identity => (oy, ox),
            Rot90 => (h - 1 - ox, oy),
            Rot180 => (h - 1 - oy, w - 1 - ox),
            Rot270 => (ox, w - 1 - oy),
            FlipH => (oy, w - 1 - ox),
            FlipV => (h - 1 - oy, ox),
            Transpose => (ox, oy),
            AntiTranspose => (h - 1 - ox, w - 1 - oy),
        }
    }
}

/// RGB image with channel-planar samples normalized to [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    /// `[3][height][width]`.
    data: Vec<f32>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 || data.len() != 3 * width * height {
            return Err(ImageError::Shape(format!(
                "{width}x{height} RGB image needs {} samples, got {}",
                3 * width * height,
                data.len()
            )));
        }
        Ok(RgbImage { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Self {
        let plane = width * height;
        let data = (0..3 * plane).map(|i| rgb[i / plane]).collect();
        RgbImage { width, height, data }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(3 * width * height);
        for c in 0..3 {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        RgbImage { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Result<Self, ImageError> {
        if bytes.len() != 3 * width * height {
            return Err(ImageError::Shape(format!(
                "{width}x{height} RGB8 buffer needs {} bytes, got {}",
                3 * width * height,
                bytes.len()
            )));
        }
        Ok(Self::from_fn(width, height, |c, y, x| bytes[(y * width + x) * 3 + c] as f32 / 255.0))
    }

    /// Interleaved 8-bit samples, clamped to [0, 1] and rounded.
    pub fn to_rgb8(&self) -> Vec<u8> {
        let plane = self.width * self.height;
        let mut out = Vec::with_capacity(3 * plane);
        for i in 0..plane {
            for c in 0..3 {
                out.push(to_u8(self.data[c * plane + i]));
            }
        }
        out
    }

    /// Rounds every sample to the nearest 8-bit level, as emission to PNG would.
    pub fn quantized(&self) -> Self {
        RgbImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| to_u8(v) as f32 / 255.0).collect(),
        }
    }

    pub fn clamped(&self) -> Self {
        RgbImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| v.clamp(0.0, 1.0)).collect(),
        }
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self, ImageError> {
        let path = path.as_ref();
        let name = path.display().to_string();
        let reader = ImageReader::open(path)
            .map_err(|source| ImageError::Io { path: name.clone(), source })?
            .with_guessed_format()
            .map_err(|source| ImageError::Io { path: name.clone(), source })?;
        if reader.format() != Some(image::ImageFormat::Png) {
            return Err(ImageError::Unsupported { path: name, found: format!("{:?}", reader.format()) });
        }
        let img = reader.decode().map_err(|e| ImageError::Decode { path: name.clone(), message: e.to_string() })?;
        if img.color() != ColorType::Rgb8 {
            return Err(ImageError::Unsupported { path: name, found: format!("{:?}", img.color()) });
        }
        let rgb = img.into_rgb8();
        Self::from_rgb8(rgb.width() as usize, rgb.height() as usize, rgb.as_raw())
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), ImageError> {
        let path = path.as_ref();
        let name = path.display().to_string();
        let file = std::fs::File::create(path).map_err(|source| ImageError::Io { path: name.clone(), source })?;
        let encoder = image::codecs::png::PngEncoder::new(std::io::BufWriter::new(file));
        encoder
            .write_image(&self.to_rgb8(), self.width as u32, self.height as u32, image::ExtendedColorType::Rgb8)
            .map_err(|e| ImageError::Decode { path: name, message: e.to_string() })
    }

    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Self, ImageError> {
        if height == 0 || width == 0 || top + height > self.height || left + width > self.width {
            return Err(ImageError::Shape(format!(
                "crop {height}x{width} at ({top}, {left}) outside {}x{} image",
                self.height, self.width
            )));
        }
        Ok(Self::from_fn(width, height, |c, y, x| self.get(c, top + y, left + x)))
    }

    pub fn transform(&self, t: Dihedral) -> Self {
        let (h, w) = (self.height, self.width);
        let (oh, ow) = if t.swaps_axes() { (w, h) } else { (h, w) };
        Self::from_fn(ow, oh, |c, y, x| {
            let (sy, sx) = t.source(y, x, h, w);
            self.get(c, sy, sx)
        })
    }

    /// `[1, 3, H, W]` tensor.
    pub fn to_tensor<T: Real>(&self) -> Tensor<T> {
        Tensor::from_fn(&[1, 3, self.height, self.width], |i| T::from_f64_lossy(self.data[i] as f64))
    }

    /// Reads batch item `index` of a `[N, 3, H, W]` tensor; values are not clamped.
    pub fn from_tensor<T: Real>(t: &Tensor<T>, index: usize) -> Result<Self, ImageError> {
        let [n, c, h, w] = t.dims4("image").map_err(|e| ImageError::Shape(e.to_string()))?;
        if c != 3 || index >= n {
            return Err(ImageError::Shape(format!("cannot read item {index} of {:?} as RGB", t.shape())));
        }
        let item = &t.data()[index * 3 * h * w..(index + 1) * 3 * h * w];
        Ok(RgbImage { width: w, height: h, data: item.iter().map(|v| v.as_f64() as f32).collect() })
    }
}

fn to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}
