//! Image I/O, bicubic resampling and whole-image inference.

mod bicubic;
mod infer;
mod rgb;

pub use bicubic::{bicubic_resample, cubic, degrade, modcrop, resample_plane, upscale_bicubic, CUBIC_A};
pub use infer::{super_resolve, super_resolve_tiled, TileOptions};
pub use rgb::{Dihedral, ImageError, RgbImage};

use std::path::{Path, PathBuf};

/// PNG files directly inside `dir`, sorted by name.
pub fn list_pngs(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, ImageError> {
    let dir = dir.as_ref();
    let io = |source| ImageError::Io { path: dir.display().to_string(), source };
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        let is_png = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png && path.is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}
