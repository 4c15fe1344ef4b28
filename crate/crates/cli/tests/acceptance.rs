//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use adrd_core::blocks::{
    format_weight_matrices, Network, NetworkConfig, ResidualDeconvStage, SpatialAttention, WeightedDenseBlock,
};
use adrd_core::imageio::{degrade, super_resolve, upscale_bicubic, RgbImage};
use adrd_core::kv::KvMap;
use adrd_core::metrics::{
    noisy_input, psnr, rcir, rgb_to_y, ssim, NoiseTarget, RandomConvExtractor, YImage, NOISE_VARIANCES,
};
use adrd_core::tensor::{GradcheckOptions, ParamStore, Tape, Tensor, TensorError, Var};
use adrd_core::train::{read_checkpoint, save_checkpoint, write_checkpoint, TrainConfig, Trainer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

type Outcome = Result<String, String>;
type Criterion = Box<dyn FnOnce(&mut Option<Network<f32>>) -> Outcome>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

const IMAGES: [&str; 5] = ["astronaut.png", "chelsea.png", "coffee.png", "hubble.png", "rocket.png"];

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

fn c1_gradients() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let x = random(&mut rng, &[1, 2, 5, 5]);
    let y = random(&mut rng, &[1, 2, 5, 5]);
    let k3 = random(&mut rng, &[3, 2, 3, 3]);
    let k4 = random(&mut rng, &[2, 3, 4, 4]);
    let b3 = random(&mut rng, &[3]);
    let z = random(&mut rng, &[1, 1, 5, 5]);
    type Op = Box<dyn Fn(&Tape<f64>, &[Var<f64>]) -> Result<Var<f64>, TensorError>>;
    let ops: Vec<(&str, Vec<Tensor<f64>>, Op)> = vec![
        ("conv2d", vec![x.clone(), k3.clone(), b3.clone()], Box::new(|t, v| t.conv2d(&v[0], &v[1], Some(&v[2]), 1, 1))),
        ("conv2d/s2", vec![x.clone(), k3.clone()], Box::new(|t, v| t.conv2d(&v[0], &v[1], None, 2, 1))),
        (
            "conv_transpose2d",
            vec![x.clone(), k4, b3],
            Box::new(|t, v| t.conv_transpose2d(&v[0], &v[1], Some(&v[2]), 2, 1)),
        ),
        ("nearest_upsample", vec![x.clone()], Box::new(|t, v| t.nearest_upsample(&v[0], 2))),
        ("prelu", vec![x.clone(), Tensor::scalar(0.25)], Box::new(|t, v| t.prelu(&v[0], &v[1]))),
        ("relu", vec![x.clone()], Box::new(|t, v| Ok(t.relu(&v[0])))),
        ("tanh", vec![x.clone()], Box::new(|t, v| Ok(t.tanh(&v[0])))),
        ("add", vec![x.clone(), y.clone()], Box::new(|t, v| t.add(&v[0], &v[1]))),
        ("hadamard", vec![x.clone(), y.clone()], Box::new(|t, v| t.hadamard(&v[0], &v[1]))),
        ("scale", vec![x.clone()], Box::new(|t, v| Ok(t.scale(&v[0], -1.3)))),
        ("mul_scalar", vec![x.clone(), Tensor::scalar(0.7)], Box::new(|t, v| t.mul_scalar(&v[0], &v[1]))),
        ("abs_diff", vec![x.clone(), y.clone()], Box::new(|t, v| t.abs_diff(&v[0], &v[1]))),
        ("concat_channels", vec![x.clone(), z], Box::new(|t, v| t.concat_channels(&[&v[0], &v[1]]))),
        ("sum", vec![x.clone()], Box::new(|t, v| Ok(t.sum(&v[0])))),
        ("mse_loss", vec![x, y], Box::new(|t, v| t.mse_loss(&v[0], &v[1]))),
    ];
    let mut worst_op = 0.0f64;
    for (name, inputs, op) in &ops {
        let projected = |t: &Tape<f64>, v: &[Var<f64>]| {
            let out = op(t, v)?;
            let mut r = ChaCha8Rng::seed_from_u64(7);
            let w = random(&mut r, out.shape());
            Ok(t.sum(&t.hadamard(&out, &Var::constant(w))?))
        };
        let rep = GradcheckOptions::new(1e-5, 1e-4).run(projected, inputs).map_err(|e| format!("{name}: {e}"))?;
        ensure(rep.passed && rep.skipped == 0, || format!("{name}: max rel error {:.3e}", rep.max_rel_error))?;
        worst_op = worst_op.max(rep.max_rel_error);
    }

    let net = Network::<f64>::new(NetworkConfig::miniature()).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let lr = random(&mut rng, &[1, 3, 8, 8]).map(|v| 0.5 + 0.5 * v);
    let target = random(&mut rng, &[1, 3, 32, 32]).map(|v| 0.5 + 0.5 * v);
    let loss = |tape: &Tape<f64>, store: &ParamStore<f64>| {
        let out = net.forward_with_params(tape, store, &Var::constant(lr.clone())).map_err(|e| match e {
            adrd_core::blocks::ModelError::Tensor(t) => t,
            other => panic!("{other}"),
        })?;
        tape.mse_loss(&out, &Var::constant(target.clone()))
    };
    let rep = GradcheckOptions::new(1e-5, 1e-3)
        .kink_threshold(1e-2)
        .run_params(loss, net.params())
        .map_err(|e| e.to_string())?;
    ensure(rep.passed, || format!("end-to-end max rel error {:.3e}", rep.max_rel_error))?;
    ensure(rep.skipped * 100 <= rep.checked, || format!("{} of {} coordinates at kinks", rep.skipped, rep.checked))?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} ops max rel {worst_op:.2e} < 1e-4; network {} params max rel {:.2e} < 1e-3 ({} kink skips); {:.1}s",
        ops.len(),
        rep.checked,
        rep.max_rel_error,
        rep.skipped,
        elapsed.as_secs_f64()
    ))
}

fn c2_adjoint() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(201);
    let tape = Tape::inference();
    let (mut done, mut worst) = (0, 0.0f64);
    while done < 50 {
        let (n, c, o) = (rng.random_range(1..3), rng.random_range(1..5), rng.random_range(1..5));
        let (k, s) = (rng.random_range(1..6), rng.random_range(1..4));
        let p = rng.random_range(0..k);
        let (h, w) = (rng.random_range(1..14), rng.random_range(1..14));
        if h + 2 * p < k || w + 2 * p < k || (h + 2 * p - k) % s != 0 || (w + 2 * p - k) % s != 0 {
            continue;
        }
        let x = random(&mut rng, &[n, c, h, w]);
        let kernel = random(&mut rng, &[o, c, k, k]);
        let fx = tape
            .conv2d(&Var::constant(x.clone()), &Var::constant(kernel.clone()), None, s, p)
            .map_err(|e| e.to_string())?;
        let y = random(&mut rng, fx.shape());
        let gy = tape
            .conv_transpose2d(&Var::constant(y.clone()), &Var::constant(kernel), None, s, p)
            .map_err(|e| e.to_string())?;
        let dot = |a: &Tensor<f64>, b: &Tensor<f64>| a.data().iter().zip(b.data()).map(|(u, v)| u * v).sum::<f64>();
        let (lhs, rhs) = (dot(fx.value(), &y), dot(&x, gy.value()));
        let err = (lhs - rhs).abs() / lhs.abs().max(1.0);
        ensure(err <= 1e-10, || format!("k{k} s{s} p{p} {h}x{w}: {lhs} vs {rhs}"))?;
        worst = worst.max(err);
        done += 1;
    }
    Ok(format!("50 geometries, worst relative gap {worst:.1e} <= 1e-10"))
}

fn c3_reductions() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(301);
    let tape = Tape::inference();
    let build = |weighted| {
        let mut store = ParamStore::<f64>::new();
        let mut r = ChaCha8Rng::seed_from_u64(302);
        let b = WeightedDenseBlock::new(&mut store, &mut r, "b", 6, 4, 5, 8, weighted).unwrap();
        (store, b)
    };
    let ((ws, wdb), (ds, db)) = (build(true), build(false));
    let head = Var::constant(random(&mut rng, &[2, 6, 7, 5]));
    let a = wdb.forward(&tape, &ws, &head).map_err(|e| e.to_string())?;
    let b = db.forward(&tape, &ds, &head).map_err(|e| e.to_string())?;
    ensure(a.value() == b.value(), || "WDB with unit weights differs from DB".into())?;

    let mut store = ParamStore::<f64>::new();
    let sa = SpatialAttention::new(&mut store, &mut rng, "sa", 4, 12, 0.0, true).map_err(|e| e.to_string())?;
    let x_in = Var::constant(random(&mut rng, &[1, 4, 6, 6]));
    let block_out = Var::constant(random(&mut rng, &[1, 12, 6, 6]));
    let out = sa.forward(&tape, &store, &x_in, &block_out).map_err(|e| e.to_string())?;
    let p = |s: &ParamStore<f64>, id| Var::constant(s.value(id).clone());
    let bottleneck = tape.relu(
        &tape
            .conv2d(&block_out, &p(&store, sa.bottleneck.weight), Some(&p(&store, sa.bottleneck.bias)), 1, 0)
            .map_err(|e| e.to_string())?,
    );
    ensure(out.value() == bottleneck.value(), || "SA with lambda 0 differs from the bottleneck".into())?;

    let mut store = ParamStore::<f64>::new();
    let stage = ResidualDeconvStage::new(&mut store, &mut rng, "rd", 5, true).map_err(|e| e.to_string())?;
    for id in [stage.deconv.weight, stage.deconv.bias] {
        let zero = Tensor::zeros(store.value(id).shape());
        store.set_value(id, zero).map_err(|e| e.to_string())?;
    }
    let x = Var::constant(random(&mut rng, &[1, 5, 4, 6]));
    let out = stage.forward(&tape, &store, &x).map_err(|e| e.to_string())?;
    let low = stage.low_path.as_ref().ok_or("residual stage has no low path")?;
    let want = tape
        .conv2d(
            &tape.nearest_upsample(&x, 2).map_err(|e| e.to_string())?,
            &p(&store, low.weight),
            Some(&p(&store, low.bias)),
            1,
            0,
        )
        .map_err(|e| e.to_string())?;
    ensure(out.value() == want.value(), || "RD with zero deconv differs from 1x1 conv of nearest upsample".into())?;
    Ok("WDB(omega=1)==DB, SA(lambda=0)==bottleneck, RD(deconv=0)==conv1x1(nearest): all bit-exact".into())
}

fn c4_channels() -> Outcome {
    let config = NetworkConfig::full();
    let net = Network::<f32>::new(config).map_err(|e| e.to_string())?;
    let x = Var::constant(Tensor::from_fn(&[1, 3, 50, 50], |i| ((i * 37) % 101) as f32 / 100.0));
    let (out, trace) = net.forward_traced(&Tape::inference(), &x).map_err(|e| e.to_string())?;
    let ch = |v: &[Vec<usize>]| v.iter().map(|s| s[1]).collect::<Vec<_>>();
    ensure(out.shape() == [1, 3, 200, 200], || format!("output {:?}", out.shape()))?;
    ensure(ch(&trace.group_outputs) == [64, 128, 256, 512], || {
        format!("group outputs {:?}", ch(&trace.group_outputs))
    })?;
    ensure(ch(&trace.group_inputs) == [32, 64, 128, 256], || format!("group inputs {:?}", ch(&trace.group_inputs)))?;
    ensure(trace.global_bottleneck[1] == 256, || format!("global bottleneck {:?}", trace.global_bottleneck))?;
    Ok(format!(
        "1x3x50x50 -> {:?}; group inputs {:?}; group outputs {:?}",
        out.shape(),
        ch(&trace.group_inputs),
        ch(&trace.group_outputs)
    ))
}

fn overfit_config() -> TrainConfig {
    TrainConfig {
        hr_patch_size: 64,
        batch_size: 1,
        initial_lr: 1e-3,
        epochs: 1,
        patches_per_image: 500,
        max_steps: 500,
        seed: 0,
        ..TrainConfig::default()
    }
}

fn y_psnr(hr: &RgbImage, sr: &RgbImage) -> Result<f64, String> {
    psnr(&rgb_to_y(hr), &rgb_to_y(sr), 4).map_err(|e| e.to_string())
}

fn overfit(hr: &RgbImage) -> Result<Network<f32>, String> {
    let net = Network::<f32>::new(NetworkConfig::tiny()).map_err(|e| e.to_string())?;
    let mut trainer = Trainer::new(net, vec![hr.clone()], Vec::new(), overfit_config()).map_err(|e| e.to_string())?;
    trainer.run(&mut |_| Ok(()), None).map_err(|e| e.to_string())?;
    Ok(trainer.into_network())
}

fn c5_overfit(trained: &mut Option<Network<f32>>) -> Outcome {
    let hr = RgbImage::load_png(data("astronaut.png")).map_err(|e| e.to_string())?;
    let lr = degrade(&hr, 4).map_err(|e| e.to_string())?;
    let bicubic = upscale_bicubic(&lr, 4).map_err(|e| e.to_string())?.quantized();
    let start = Instant::now();
    let net = overfit(&hr)?;
    let elapsed = start.elapsed();
    let sr = super_resolve(&net, &lr).map_err(|e| e.to_string())?.quantized();
    let (p_bic, p_sr) = (y_psnr(&hr, &bicubic)?, y_psnr(&hr, &sr)?);
    let again = overfit(&hr)?;
    let same = write_checkpoint(&net, &KvMap::new(), None) == write_checkpoint(&again, &KvMap::new(), None);
    *trained = Some(net);
    ensure(p_sr - p_bic >= 1.0, || format!("SR {p_sr:.3} dB vs bicubic {p_bic:.3} dB"))?;
    ensure(elapsed < Duration::from_secs(300), || format!("took {elapsed:?}"))?;
    ensure(same, || "two runs with seed 0 produced different weights".into())?;
    Ok(format!(
        "SR {p_sr:.2} dB vs bicubic {p_bic:.2} dB (+{:.2} >= 1.0); {:.1}s; repeat run bit-identical",
        p_sr - p_bic,
        elapsed.as_secs_f64()
    ))
}

fn c6_metrics() -> Outcome {
    let a = YImage::new(24, 24, (0..576).map(|i| 40.0 + (i % 97) as f64).collect()).map_err(|e| e.to_string())?;
    let b = YImage::new(24, 24, a.data().iter().map(|v| v + 16.0).collect()).map_err(|e| e.to_string())?;
    let p_same = psnr(&a, &a, 0).map_err(|e| e.to_string())?;
    let p16 = psnr(&a, &b, 0).map_err(|e| e.to_string())?;
    let s_same = ssim(&a, &a, 0).map_err(|e| e.to_string())?;
    ensure(p_same == f64::INFINITY, || format!("psnr(a,a) = {p_same}"))?;
    ensure((p16 - 24.05).abs() <= 0.01, || format!("uniform offset 16 gives {p16}"))?;
    ensure(s_same == 1.0, || format!("ssim(a,a) = {s_same}"))?;
    let hr = RgbImage::load_png(data("coffee.png")).map_err(|e| e.to_string())?;
    let bic = upscale_bicubic(&degrade(&hr, 4).map_err(|e| e.to_string())?, 4).map_err(|e| e.to_string())?.quantized();
    let phi = RandomConvExtractor::default();
    let r_hr = rcir(&hr, &hr, &bic, &phi).map_err(|e| e.to_string())?;
    let r_bic = rcir(&hr, &bic, &bic, &phi).map_err(|e| e.to_string())?;
    ensure((r_hr - 1.0).abs() <= 1e-9 && r_bic.abs() <= 1e-9, || format!("rcir endpoints {r_hr} / {r_bic}"))?;
    Ok(format!("psnr(a,a)=inf; offset-16 psnr {p16:.4}; ssim(a,a)=1; rcir(hr)={r_hr}, rcir(bicubic)={r_bic}"))
}

fn c7_noise() -> Outcome {
    let mut lines = Vec::new();
    for (i, name) in IMAGES.iter().enumerate() {
        let hr = RgbImage::load_png(data(name)).map_err(|e| e.to_string())?;
        let mut values = Vec::new();
        for &var in &NOISE_VARIANCES {
            let lr = noisy_input(&hr, 4, var, i as u64, NoiseTarget::Lr).map_err(|e| e.to_string())?;
            let bic = upscale_bicubic(&lr, 4).map_err(|e| e.to_string())?.quantized();
            values.push(y_psnr(&hr, &bic)?);
        }
        let text: Vec<String> = values.iter().map(|v| format!("{v:.3}")).collect();
        ensure(values.windows(2).all(|w| w[1] < w[0]), || format!("{name}: {}", text.join(" > ")))?;
        lines.push(format!("{}: {}", name.trim_end_matches(".png"), text.join(">")));
    }
    Ok(format!("strictly decreasing on 5 images ({})", lines.join("; ")))
}

fn adrd(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_adrd")).args(args).output().map_err(|e| e.to_string())?;
    ensure(out.status.success(), || format!("adrd {args:?}: {}", String::from_utf8_lossy(&out.stderr)))
}

fn c8_persistence() -> Outcome {
    let images: Vec<RgbImage> =
        IMAGES.iter().map(|n| RgbImage::load_png(data(n))).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    let config = TrainConfig {
        hr_patch_size: 32,
        batch_size: 2,
        initial_lr: 1e-3,
        epochs: 4,
        patches_per_image: 2,
        seed: 3,
        ..TrainConfig::default()
    };
    let fresh = || {
        let net = Network::<f32>::new(NetworkConfig::tiny()).unwrap();
        Trainer::new(net, images.clone(), Vec::new(), config.clone()).unwrap()
    };
    let mut full = fresh();
    let whole = full.run(&mut |_| Ok(()), None).map_err(|e| e.to_string())?.step_losses;
    let mut first = fresh();
    let mut losses = Vec::new();
    for _ in 0..7 {
        losses.push(first.train_step().map_err(|e| e.to_string())?);
    }
    let bytes = write_checkpoint(first.network(), &first.state(), Some(first.optimizer()));
    drop(first);
    let ck = read_checkpoint(&bytes).map_err(|e| e.to_string())?;
    let resumed_config = Trainer::config_from_state(&ck.state).map_err(|e| e.to_string())?;
    let mut second = Trainer::resume(ck, images.clone(), Vec::new(), resumed_config).map_err(|e| e.to_string())?;
    losses.extend(second.run(&mut |_| Ok(()), None).map_err(|e| e.to_string())?.step_losses);
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    ensure(bits(&losses) == bits(&whole), || "resumed loss trajectory differs".into())?;
    let final_bytes = |t: &Trainer| write_checkpoint(t.network(), &t.state(), Some(t.optimizer()));
    ensure(final_bytes(&full) == final_bytes(&second), || "resumed final state differs".into())?;

    let tmp = TempDir::new().map_err(|e| e.to_string())?;
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    let d = dir.to_str().unwrap();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        let o = out.to_str().unwrap();
        adrd(&[
            "train",
            "--data",
            d,
            "--out",
            o,
            "--preset",
            "tiny",
            "--max-steps",
            "6",
            "--batch-size",
            "2",
            "--patch-size",
            "32",
            "--patches-per-image",
            "2",
            "--lr",
            "1e-3",
            "--seed",
            "5",
        ])?;
        let ck = out.join("latest.adrd");
        let c = ck.to_str().unwrap();
        adrd(&["sr", "--checkpoint", c, "--input", d, "--output", out.join("sr").to_str().unwrap()])?;
        adrd(&["eval", "--hr", d, "--checkpoint", c, "--out", out.join("eval.csv").to_str().unwrap()])?;
        adrd(&["export-weights", "--checkpoint", c, "--out", out.join("w.txt").to_str().unwrap()])?;
    }
    let mut files = vec!["latest.adrd".to_string(), "train_log.csv".into(), "eval.csv".into(), "w.txt".into()];
    files.extend(IMAGES.iter().map(|n| format!("sr/{n}")));
    for f in &files {
        let read = |run: &str| fs::read(tmp.path().join(run).join(f)).map_err(|e| format!("{f}: {e}"));
        ensure(read("a")? == read("b")?, || format!("{f} differs between identical CLI runs"))?;
    }
    Ok(format!(
        "{} losses identical across save/load/resume at step 7; {} CLI outputs byte-identical",
        whole.len(),
        files.len()
    ))
}

fn c9_weights(trained: Option<Network<f32>>) -> Outcome {
    let net = trained.ok_or("criterion 5 produced no trained network")?;
    let tmp = TempDir::new().map_err(|e| e.to_string())?;
    let ck = tmp.path().join("overfit.adrd");
    save_checkpoint(&ck, &net, &KvMap::new(), None).map_err(|e| e.to_string())?;
    let out = tmp.path().join("weights.txt");
    adrd(&["export-weights", "--checkpoint", ck.to_str().unwrap(), "--out", out.to_str().unwrap()])?;
    let text = fs::read_to_string(&out).map_err(|e| e.to_string())?;
    ensure(text == format_weight_matrices(&net.weight_matrices()), || "CLI output differs from the library".into())?;
    let (mut rows, mut row, mut max_dev) = (0, 0, 0.0f64);
    for line in text.lines() {
        if line.starts_with('#') {
            row = 0;
        } else if !line.is_empty() {
            row += 1;
            rows += 1;
            let cells: Vec<f64> =
                line.split('\t').map(|c| c.parse::<f64>()).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
            ensure(cells.len() == row, || format!("row {row} has {} entries", cells.len()))?;
            max_dev = cells.iter().fold(max_dev, |m, w| m.max((w - 1.0).abs()));
        }
    }
    ensure(max_dev > 1e-3, || format!("largest |omega - 1| is {max_dev:.2e}"))?;
    Ok(format!("{rows} rows, row l has l entries; largest |omega - 1| = {max_dev:.4} > 1e-3"))
}

fn main() {
    let mut trained = None;
    let criteria: Vec<(&str, Criterion)> = vec![
        ("gradient suite", Box::new(|_| c1_gradients())),
        ("conv adjoint", Box::new(|_| c2_adjoint())),
        ("exact reductions", Box::new(|_| c3_reductions())),
        ("channel bookkeeping", Box::new(|_| c4_channels())),
        ("overfit one image", Box::new(c5_overfit)),
        ("metric oracles", Box::new(|_| c6_metrics())),
        ("noise trend", Box::new(|_| c7_noise())),
        ("reproducibility and resume", Box::new(|_| c8_persistence())),
        ("edge-weight inspection", Box::new(|t| c9_weights(t.take()))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(|| check(&mut trained)))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        match outcome {
            Ok(detail) => println!("criterion {} [{name}]: PASS  {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} [{name}]: FAIL  {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
