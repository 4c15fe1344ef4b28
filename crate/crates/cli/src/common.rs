use std::path::{Path, PathBuf};

use adrd_core::blocks::{Network, NetworkConfig};
use adrd_core::imageio::{list_pngs, RgbImage};
use adrd_core::kv::KvMap;
use adrd_core::train::load_checkpoint;
use clap::ValueEnum;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Full,
    Lightweight,
    Tiny,
    Miniature,
}

impl Preset {
    pub fn config(self, growth_rate: Option<usize>) -> NetworkConfig {
        let mut c = match self {
            Preset::Full => NetworkConfig::full(),
            Preset::Lightweight => NetworkConfig::lightweight(32),
            Preset::Tiny => NetworkConfig::tiny(),
            Preset::Miniature => NetworkConfig::miniature(),
        };
        if let Some(g) = growth_rate {
            c.growth_rate = g;
        }
        c
    }
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Network topology from a preset, optionally overridden by a key=value file.
pub fn network_config(
    preset: Preset,
    growth_rate: Option<usize>,
    file: Option<&Path>,
) -> Result<NetworkConfig, CliError> {
    let base = preset.config(growth_rate);
    let config = match file {
        Some(p) => {
            let map = KvMap::parse(&read_text(p)?).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            NetworkConfig::from_kv(&map, &base)?
        }
        None => base,
    };
    config.validate()?;
    Ok(config)
}

/// PNG files of a directory, or the single file given.
pub fn png_paths(path: &Path) -> Result<Vec<PathBuf>, CliError> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    if !path.is_dir() {
        return Err(CliError::Data(format!("{}: no such file or directory", path.display())));
    }
    let paths = list_pngs(path)?;
    if paths.is_empty() {
        return Err(CliError::Data(format!("{}: no PNG images found", path.display())));
    }
    Ok(paths)
}

pub fn load_images(path: &Path) -> Result<Vec<(String, RgbImage)>, CliError> {
    png_paths(path)?.into_iter().map(|p| Ok((file_name(&p), RgbImage::load_png(&p)?))).collect()
}

pub fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

/// Network from a checkpoint; with `expected`, the stored topology must match it.
pub fn load_network(path: &Path, expected: Option<&NetworkConfig>) -> Result<Network<f32>, CliError> {
    if !path.is_file() {
        return Err(CliError::Data(format!("{}: checkpoint not found", path.display())));
    }
    let ck = load_checkpoint(path)?;
    if let Some(want) = expected {
        if ck.network.config() != want {
            return Err(CliError::Data(format!(
                "{}: checkpoint topology differs from the requested network config",
                path.display()
            )));
        }
    }
    Ok(ck.network)
}

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Prints a titled block of `key=value` lines.
pub fn print_section(title: &str, map: &KvMap) {
    println!("[{title}]");
    print!("{}", map.to_text());
}

pub fn kv<const N: usize>(pairs: [(&str, String); N]) -> KvMap {
    let mut m = KvMap::new();
    for (k, v) in pairs {
        m.set(k, v);
    }
    m
}

pub fn opt_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "-".into())
}
