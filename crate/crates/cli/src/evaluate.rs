use std::fmt::Write as _;
use std::fs::File;
use std::path::Path;

use adrd_core::blocks::Network;
use adrd_core::imageio::{degrade, modcrop, upscale_bicubic, RgbImage};
use adrd_core::metrics::{
    mean_scores, noisy_input, psnr, rgb_to_y, score, write_report, NoiseTarget, RandomConvExtractor, Scores,
    NOISE_VARIANCES,
};

use crate::common::{create_dir, kv, load_images, load_network, opt_path, print_section};
use crate::error::CliError;
use crate::infer::{upscale, write_text};
use crate::{EvalArgs, FeatureArgs, NoiseEvalArgs};

/// Applies `f` to every item on scoped worker threads; results keep input order.
pub fn par_map<I: Sync, O: Send>(
    items: &[I],
    f: impl Fn(usize, &I) -> Result<O, CliError> + Sync,
) -> Result<Vec<O>, CliError> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len()).max(1);
    let f = &f;
    let mut slots: Vec<Option<Result<O, CliError>>> = (0..items.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        for (w, chunk) in slots.chunks_mut(items.len().div_ceil(workers).max(1)).enumerate() {
            let start = w * items.len().div_ceil(workers).max(1);
            s.spawn(move || {
                for (k, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(f(start + k, &items[start + k]));
                }
            });
        }
    });
    slots.into_iter().map(|r| r.expect("every slot is filled")).collect()
}

pub fn extractor(a: &FeatureArgs) -> RandomConvExtractor {
    RandomConvExtractor::new(a.feature_depth, a.feature_channels, a.feature_seed)
}

/// Reference, bicubic baseline and method output for one high-resolution image.
pub struct Triple {
    pub hr: RgbImage,
    pub bicubic: RgbImage,
    pub sr: RgbImage,
}

/// Modcrops `hr`, shrinks it and super-resolves with `net` (bicubic when `None`);
/// outputs are quantized to 8 bits as they would be on disk.
pub fn reconstruct(hr: &RgbImage, scale: usize, net: Option<&Network<f32>>, tile: usize) -> Result<Triple, CliError> {
    let hr = modcrop(hr, scale)?;
    let lr = degrade(&hr, scale)?;
    let bicubic = upscale_bicubic(&lr, scale)?.quantized();
    let sr = match net {
        Some(net) => upscale(net, &lr, tile, 8)?.quantized(),
        None => bicubic.clone(),
    };
    Ok(Triple { hr, bicubic, sr })
}

pub fn score_images(
    images: &[(String, RgbImage)],
    scale: usize,
    net: Option<&Network<f32>>,
    tile: usize,
    border: usize,
    phi: &RandomConvExtractor,
    save_dir: Option<&Path>,
) -> Result<Vec<(String, Scores)>, CliError> {
    par_map(images, |_, (name, hr)| {
        let t = reconstruct(hr, scale, net, tile)?;
        if let Some(dir) = save_dir {
            t.sr.save_png(dir.join(name))?;
        }
        Ok((name.clone(), score(&t.hr, &t.sr, &t.bicubic, phi, border)?))
    })
}

pub fn eval(args: EvalArgs) -> Result<(), CliError> {
    let net = match &args.checkpoint {
        Some(p) => Some(load_network(p, None)?),
        None => None,
    };
    let scale = net.as_ref().map_or(args.scale, |n| n.config().scale_factor);
    let border = args.border.unwrap_or(scale);
    let images = load_images(&args.hr)?;
    if let Some(net) = &net {
        print_section("network", &net.config().to_kv());
    }
    print_section(
        "eval",
        &kv([
            ("hr", args.hr.display().to_string()),
            ("method", if net.is_some() { "network".into() } else { "bicubic".into() }),
            ("checkpoint", opt_path(&args.checkpoint)),
            ("scale", scale.to_string()),
            ("border", border.to_string()),
            ("tile", args.tile.to_string()),
            ("out", args.out.display().to_string()),
            ("save_sr", opt_path(&args.save_sr)),
            ("feature_depth", args.features.feature_depth.to_string()),
            ("feature_channels", args.features.feature_channels.to_string()),
            ("feature_seed", args.features.feature_seed.to_string()),
            ("images", images.len().to_string()),
        ]),
    );
    if let Some(dir) = &args.save_sr {
        create_dir(dir)?;
    }
    let phi = extractor(&args.features);
    let mut rows = score_images(&images, scale, net.as_ref(), args.tile, border, &phi, args.save_sr.as_deref())?;
    for (name, s) in &rows {
        println!("{name} psnr_db={:.4} ssim={:.4} rcir={:.4}", s.psnr_db, s.ssim, s.rcir);
    }
    let scores: Vec<Scores> = rows.iter().map(|(_, s)| *s).collect();
    if let Some(mean) = mean_scores(&scores) {
        println!("mean psnr_db={:.4} ssim={:.4} rcir={:.4}", mean.psnr_db, mean.ssim, mean.rcir);
        rows.push(("mean".into(), mean));
    }
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let file = File::create(&args.out).map_err(|e| CliError::Data(format!("{}: {e}", args.out.display())))?;
    write_report(file, &rows)?;
    Ok(())
}

pub fn noise_eval(args: NoiseEvalArgs) -> Result<(), CliError> {
    let net = match &args.checkpoint {
        Some(p) => Some(load_network(p, None)?),
        None => None,
    };
    let scale = net.as_ref().map_or(args.scale, |n| n.config().scale_factor);
    let border = args.border.unwrap_or(scale);
    let target = if args.noise_on_hr { NoiseTarget::Hr } else { NoiseTarget::Lr };
    let images = load_images(&args.hr)?;
    let variances: Vec<String> = NOISE_VARIANCES.iter().map(|v| format!("{v:e}")).collect();
    if let Some(net) = &net {
        print_section("network", &net.config().to_kv());
    }
    print_section(
        "noise-eval",
        &kv([
            ("hr", args.hr.display().to_string()),
            ("checkpoint", opt_path(&args.checkpoint)),
            ("noise_target", if args.noise_on_hr { "hr".into() } else { "lr".into() }),
            ("variances", variances.join(",")),
            ("seed", args.seed.to_string()),
            ("scale", scale.to_string()),
            ("border", border.to_string()),
            ("out", args.out.display().to_string()),
            ("images", images.len().to_string()),
        ]),
    );

    // rows[image][variance] = (bicubic, network)
    let rows = par_map(&images, |i, (_, hr)| {
        let hr = modcrop(hr, scale)?;
        let y_hr = rgb_to_y(&hr);
        NOISE_VARIANCES
            .iter()
            .map(|&var| {
                let lr = noisy_input(&hr, scale, var, args.seed.wrapping_add(i as u64), target)?;
                let bic = upscale_bicubic(&lr, scale)?.quantized();
                let p_bic = psnr(&y_hr, &rgb_to_y(&bic), border)?;
                let p_net = match &net {
                    Some(n) => Some(psnr(&y_hr, &rgb_to_y(&upscale(n, &lr, 0, 8)?.quantized()), border)?),
                    None => None,
                };
                Ok((p_bic, p_net))
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;

    create_dir(&args.out)?;
    let csv_path = args.out.join("noise.csv");
    let file = File::create(&csv_path).map_err(|e| CliError::Data(format!("{}: {e}", csv_path.display())))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["image", "variance", "method", "psnr_db"])?;
    for ((name, _), per_var) in images.iter().zip(&rows) {
        for (var, (p_bic, p_net)) in variances.iter().zip(per_var) {
            w.write_record([name.as_str(), var, "bicubic", &p_bic.to_string()])?;
            if let Some(p) = p_net {
                w.write_record([name.as_str(), var, "adrd", &p.to_string()])?;
            }
        }
    }
    w.flush()?;

    let n = images.len() as f64;
    let mut table = String::new();
    let _ = write!(table, "{:<10}{:>10}", "Level", "Bicubic");
    if net.is_some() {
        let _ = write!(table, "{:>10}", "ADRD");
    }
    table.push('\n');
    for (k, var) in variances.iter().enumerate() {
        let bic = rows.iter().map(|r| r[k].0).sum::<f64>() / n;
        let _ = write!(table, "{var:<10}{bic:>10.2}");
        if net.is_some() {
            let sr = rows.iter().map(|r| r[k].1.unwrap_or(f64::NAN)).sum::<f64>() / n;
            let _ = write!(table, "{sr:>10.2}");
        }
        table.push('\n');
    }
    print!("{table}");
    write_text(&args.out.join("noise_table.txt"), &table)
}
