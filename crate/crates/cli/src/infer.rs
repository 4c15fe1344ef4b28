use std::path::Path;

use adrd_core::blocks::{format_weight_matrices, Network};
use adrd_core::imageio::{super_resolve, super_resolve_tiled, RgbImage, TileOptions};

use crate::common::{create_dir, file_name, kv, load_network, network_config, png_paths, print_section, Preset};
use crate::error::CliError;
use crate::{ExportWeightsArgs, SrArgs};

/// Network output for `lr`, whole-image when `tile` is 0.
pub fn upscale(net: &Network<f32>, lr: &RgbImage, tile: usize, overlap: usize) -> Result<RgbImage, CliError> {
    let sr =
        if tile == 0 { super_resolve(net, lr)? } else { super_resolve_tiled(net, lr, TileOptions { tile, overlap })? };
    Ok(sr)
}

pub fn sr(args: SrArgs) -> Result<(), CliError> {
    let expected = match &args.net_config {
        Some(p) => Some(network_config(Preset::Full, None, Some(p))?),
        None => None,
    };
    let net = load_network(&args.checkpoint, expected.as_ref())?;
    let inputs = png_paths(&args.input)?;
    let to_dir = args.input.is_dir();
    print_section("network", &net.config().to_kv());
    print_section(
        "sr",
        &kv([
            ("checkpoint", args.checkpoint.display().to_string()),
            ("input", args.input.display().to_string()),
            ("output", args.output.display().to_string()),
            ("tile", args.tile.to_string()),
            ("overlap", args.overlap.to_string()),
            ("images", inputs.len().to_string()),
        ]),
    );
    if to_dir {
        create_dir(&args.output)?;
    } else if let Some(parent) = args.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    for path in &inputs {
        let lr = RgbImage::load_png(path)?;
        let out = upscale(&net, &lr, args.tile, args.overlap)?;
        let dest = if to_dir { args.output.join(file_name(path)) } else { args.output.clone() };
        out.save_png(&dest)?;
        println!(
            "{} {}x{} -> {} {}x{}",
            path.display(),
            lr.width(),
            lr.height(),
            dest.display(),
            out.width(),
            out.height()
        );
    }
    Ok(())
}

pub fn export_weights(args: ExportWeightsArgs) -> Result<(), CliError> {
    let net = load_network(&args.checkpoint, None)?;
    let text = format_weight_matrices(&net.weight_matrices());
    match &args.out {
        Some(path) => {
            print_section(
                "export-weights",
                &kv([("checkpoint", args.checkpoint.display().to_string()), ("out", path.display().to_string())]),
            );
            write_text(path, &text)
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}
