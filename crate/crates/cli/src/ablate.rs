use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::File;

use adrd_core::blocks::{Network, NetworkConfig};
use adrd_core::metrics::{mean_scores, Scores};
use adrd_core::train::{TrainConfig, Trainer};

use crate::common::{create_dir, kv, load_images, opt_path, print_section};
use crate::error::CliError;
use crate::evaluate::{extractor, score_images};
use crate::infer::write_text;
use crate::AblateArgs;

/// One trained variant as it appears in the report.
pub struct Row {
    pub study: &'static str,
    pub variant: String,
    pub growth_rate: usize,
    pub params: usize,
    pub scores: Scores,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct Switches {
    growth_rate: usize,
    weighted: bool,
    attention: bool,
    residual: bool,
}

impl Switches {
    fn network(self, seed: u64) -> NetworkConfig {
        NetworkConfig {
            growth_rate: self.growth_rate,
            weighted_dense: self.weighted,
            attention: self.attention,
            residual_deconv: self.residual,
            seed,
            ..NetworkConfig::tiny()
        }
    }
}

/// `(study, column label, switches)` in table order.
fn plan(growth_rates: &[usize]) -> Vec<(&'static str, String, Switches)> {
    let full = |g| Switches { growth_rate: g, weighted: true, attention: true, residual: true };
    let mut out = Vec::new();
    for &g in growth_rates {
        out.push(("wdb", format!("DB-{g}"), Switches { weighted: false, ..full(g) }));
        out.push(("wdb", format!("WDB-{g}"), full(g)));
    }
    for &g in growth_rates {
        out.push(("sa", format!("noSA-{g}"), Switches { attention: false, ..full(g) }));
        out.push(("sa", format!("SA-{g}"), full(g)));
    }
    let g = growth_rates[0];
    out.push(("rd", format!("D-{g}"), Switches { residual: false, ..full(g) }));
    out.push(("rd", format!("RD-{g}"), full(g)));
    out
}

fn table(rows: &[Row], study: &str, rcir: bool) -> String {
    let cols: Vec<&Row> = rows.iter().filter(|r| r.study == study).collect();
    let mut t = String::new();
    let _ = write!(t, "{:<6}", "Index");
    for r in &cols {
        let _ = write!(t, "{:>10}", r.variant);
    }
    t.push('\n');
    let mut line = |label: &str, f: &dyn Fn(&Scores) -> String| {
        let _ = write!(t, "{label:<6}");
        for r in &cols {
            let _ = write!(t, "{:>10}", f(&r.scores));
        }
        t.push('\n');
    };
    line("PSNR", &|s| format!("{:.2}", s.psnr_db));
    line("SSIM", &|s| format!("{:.4}", s.ssim));
    if rcir {
        line("RCIR", &|s| format!("{:.3}", s.rcir));
    }
    t
}

pub fn run(args: AblateArgs) -> Result<(), CliError> {
    if args.growth_rates.is_empty() {
        return Err(CliError::Usage("at least one growth rate is required".into()));
    }
    let train_set = load_images(&args.data)?;
    let eval_set = match &args.val {
        Some(p) => load_images(p)?,
        None => train_set.clone(),
    };
    let train_config = TrainConfig {
        hr_patch_size: args.patch_size,
        batch_size: args.batch_size,
        initial_lr: args.lr,
        epochs: usize::try_from(args.steps).unwrap_or(usize::MAX).max(1),
        max_steps: args.steps,
        seed: args.seed,
        ..TrainConfig::default()
    };
    let growth: Vec<String> = args.growth_rates.iter().map(|g| g.to_string()).collect();
    print_section("network", &NetworkConfig { seed: args.seed, ..NetworkConfig::tiny() }.to_kv());
    print_section("train", &train_config.to_kv());
    print_section(
        "ablate",
        &kv([
            ("data", args.data.display().to_string()),
            ("val", opt_path(&args.val)),
            ("out", args.out.display().to_string()),
            ("growth_rates", growth.join(",")),
            ("feature_depth", args.features.feature_depth.to_string()),
            ("feature_channels", args.features.feature_channels.to_string()),
            ("feature_seed", args.features.feature_seed.to_string()),
        ]),
    );

    let images: Vec<_> = train_set.iter().map(|(_, img)| img.clone()).collect();
    let phi = extractor(&args.features);
    let scale = train_config.scale;
    let mut cache: HashMap<Switches, (usize, Scores)> = HashMap::new();
    let mut rows = Vec::new();
    for (study, variant, sw) in plan(&args.growth_rates) {
        let (params, scores) = match cache.get(&sw) {
            Some(hit) => *hit,
            None => {
                let net = Network::new(sw.network(args.seed))?;
                let params = net.params().num_scalars();
                let mut trainer = Trainer::new(net, images.clone(), Vec::new(), train_config.clone())?;
                trainer.run(&mut |_| Ok(()), None)?;
                let net = trainer.into_network();
                let per_image = score_images(&eval_set, scale, Some(&net), 0, scale, &phi, None)?;
                let all: Vec<Scores> = per_image.iter().map(|(_, s)| *s).collect();
                let mean = mean_scores(&all).expect("evaluation set is not empty");
                cache.insert(sw, (params, mean));
                (params, mean)
            }
        };
        println!(
            "{study} {variant} params={params} psnr_db={:.4} ssim={:.4} rcir={:.4}",
            scores.psnr_db, scores.ssim, scores.rcir
        );
        rows.push(Row { study, variant, growth_rate: sw.growth_rate, params, scores });
    }

    create_dir(&args.out)?;
    let csv_path = args.out.join("ablation.csv");
    let file = File::create(&csv_path).map_err(|e| CliError::Data(format!("{}: {e}", csv_path.display())))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["study", "variant", "growth_rate", "params", "psnr_db", "ssim", "rcir"])?;
    for r in &rows {
        w.write_record([
            r.study.to_string(),
            r.variant.clone(),
            r.growth_rate.to_string(),
            r.params.to_string(),
            r.scores.psnr_db.to_string(),
            r.scores.ssim.to_string(),
            r.scores.rcir.to_string(),
        ])?;
    }
    w.flush()?;

    let text = format!(
        "Weighted dense block\n{}\nSpatial attention\n{}\nResidual deconvolution\n{}",
        table(&rows, "wdb", false),
        table(&rows, "sa", true),
        table(&rows, "rd", false)
    );
    print!("{text}");
    write_text(&args.out.join("tables.txt"), &text)
}
