use std::fs::OpenOptions;

use adrd_core::blocks::Network;
use adrd_core::kv::KvMap;
use adrd_core::train::{load_checkpoint, write_log_header, write_log_row, TrainConfig, Trainer};

use crate::common::{create_dir, kv, load_images, network_config, opt_path, print_section, read_text};
use crate::error::CliError;
use crate::TrainArgs;

pub const LOG_FILE: &str = "train_log.csv";

fn apply_overrides(args: &TrainArgs, mut c: TrainConfig) -> TrainConfig {
    if let Some(v) = args.epochs {
        c.epochs = v;
    }
    if let Some(v) = args.max_steps {
        c.max_steps = v;
    }
    if let Some(v) = args.seed {
        c.seed = v;
    }
    if let Some(v) = args.lr {
        c.initial_lr = v;
    }
    if let Some(v) = args.batch_size {
        c.batch_size = v;
    }
    if let Some(v) = args.patch_size {
        c.hr_patch_size = v;
    }
    if let Some(v) = args.patches_per_image {
        c.patches_per_image = v;
    }
    if let Some(v) = args.checkpoint_every {
        c.checkpoint_every = v;
    }
    if args.no_augment {
        c.augment_flip = false;
        c.augment_rotate = false;
    }
    c
}

fn config_file(args: &TrainArgs, base: TrainConfig) -> Result<TrainConfig, CliError> {
    match &args.config {
        Some(p) => {
            let map = KvMap::parse(&read_text(p)?).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            Ok(TrainConfig::from_kv(&map, &base)?)
        }
        None => Ok(base),
    }
}

pub fn run(args: TrainArgs) -> Result<(), CliError> {
    let images: Vec<_> = load_images(&args.data)?.into_iter().map(|(_, img)| img).collect();
    let validation: Vec<_> = match &args.val {
        Some(p) => load_images(p)?.into_iter().map(|(_, img)| img).collect(),
        None => Vec::new(),
    };

    let mut trainer = match &args.resume {
        Some(path) => {
            if !path.is_file() {
                return Err(CliError::Data(format!("{}: checkpoint not found", path.display())));
            }
            let ck = load_checkpoint(path)?;
            if args.net.net_config.is_some() || args.net.growth_rate.is_some() {
                let want = network_config(args.net.preset, args.net.growth_rate, args.net.net_config.as_deref())?;
                if ck.network.config() != &want {
                    return Err(CliError::Data(format!(
                        "{}: checkpoint topology differs from the requested network config",
                        path.display()
                    )));
                }
            }
            let saved = Trainer::config_from_state(&ck.state)?;
            let config = apply_overrides(&args, config_file(&args, saved)?);
            Trainer::resume(ck, images, validation, config)?
        }
        None => {
            let mut net_config = network_config(args.net.preset, args.net.growth_rate, args.net.net_config.as_deref())?;
            let base = TrainConfig { scale: net_config.scale_factor, ..TrainConfig::default() };
            let config = apply_overrides(&args, config_file(&args, base)?);
            if let Some(seed) = args.seed {
                net_config.seed = seed;
            }
            Trainer::new(Network::new(net_config)?, images, validation, config)?
        }
    };

    print_section("network", &trainer.network().config().to_kv());
    print_section("train", &trainer.config().to_kv());
    print_section(
        "run",
        &kv([
            ("data", args.data.display().to_string()),
            ("val", opt_path(&args.val)),
            ("out", args.out.display().to_string()),
            ("resume", opt_path(&args.resume)),
            ("parameters", trainer.network().params().num_scalars().to_string()),
            ("steps_per_epoch", trainer.steps_per_epoch().to_string()),
            ("start_step", trainer.steps_done().to_string()),
            ("total_steps", trainer.total_steps().to_string()),
        ]),
    );

    create_dir(&args.out)?;
    let log_path = args.out.join(LOG_FILE);
    let fresh = args.resume.is_none() || !log_path.exists();
    let file = OpenOptions::new()
        .create(true)
        .write(true)
        .append(!fresh)
        .truncate(fresh)
        .open(&log_path)
        .map_err(|e| CliError::Data(format!("{}: {e}", log_path.display())))?;
    let mut log = csv::Writer::from_writer(file);
    if fresh {
        write_log_header(&mut log)?;
    }
    let report = trainer.run(
        &mut |r| {
            let val = r.val_psnr.map(|v| format!(" val_psnr={v:.4}")).unwrap_or_default();
            println!("epoch={} step={} lr={} loss={:.6e}{val}", r.epoch, r.step, r.lr, r.loss);
            write_log_row(&mut log, r)
        },
        Some(&args.out),
    )?;
    log.flush()?;
    if let Some(last) = report.step_losses.last() {
        println!("final_step={} final_loss={last:.6e}", trainer.steps_done());
    }
    for path in &report.checkpoints {
        println!("checkpoint={}", path.display());
    }
    Ok(())
}
