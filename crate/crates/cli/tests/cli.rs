use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use adrd_core::blocks::{Network, NetworkConfig};
use adrd_core::imageio::RgbImage;
use adrd_core::kv::KvMap;
use adrd_core::train::save_checkpoint;
use tempfile::TempDir;

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

fn adrd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adrd")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn ok(args: &[&str]) -> String {
    let out = adrd(args);
    assert_eq!(code(&out), 0, "{args:?}\n{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Fast tiny-network training: 3 steps per epoch over the five test images.
fn train(out: &Path, max_steps: &str, resume: Option<&Path>) -> String {
    let data = data_dir();
    let mut args = vec![
        "train",
        "--data",
        s(&data),
        "--out",
        s(out),
        "--preset",
        "tiny",
        "--max-steps",
        max_steps,
        "--batch-size",
        "5",
        "--patches-per-image",
        "3",
        "--patch-size",
        "32",
        "--lr",
        "1e-3",
        "--seed",
        "7",
        "--checkpoint-every",
        "1",
    ];
    if let Some(r) = resume {
        args.extend(["--resume", s(r)]);
    }
    ok(&args)
}

fn tiny_checkpoint(dir: &Path) -> PathBuf {
    let out = dir.join("tiny");
    train(&out, "3", None);
    out.join("latest.adrd")
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

#[test]
fn exit_codes_follow_the_failure_class() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&adrd(&["--help"])), 0);
    assert_eq!(code(&adrd(&["train", "--help"])), 0);
    assert_eq!(code(&adrd(&[])), 1);
    assert_eq!(code(&adrd(&["eval", "--hr", "x", "--out", "y", "--bicubic", "--frobnicate"])), 1);
    assert_eq!(code(&adrd(&["eval", "--hr", "x", "--out", "y"])), 1, "a method is required");

    let bad = tmp.path().join("bad.cfg");
    fs::write(&bad, "growth_rate=8\nfrobnicate=1\n").unwrap();
    let out = tmp.path().join("o");
    let data = data_dir();
    assert_eq!(code(&adrd(&["train", "--data", s(&data), "--out", s(&out), "--net-config", s(&bad)])), 1);

    let missing = tmp.path().join("none.adrd");
    let o = adrd(&["sr", "--checkpoint", s(&missing), "--input", s(&data), "--output", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("checkpoint not found"));

    let broken = tmp.path().join("broken");
    fs::create_dir(&broken).unwrap();
    fs::write(broken.join("x.png"), b"not a png").unwrap();
    assert_eq!(code(&adrd(&["eval", "--hr", s(&broken), "--bicubic", "--out", s(&out)])), 2);

    let garbage = tmp.path().join("garbage.adrd");
    fs::write(&garbage, b"ADRD0....").unwrap();
    assert_eq!(code(&adrd(&["export-weights", "--checkpoint", s(&garbage)])), 2);

    let o = adrd(&[
        "train",
        "--data",
        s(&data),
        "--out",
        s(&out),
        "--preset",
        "tiny",
        "--max-steps",
        "5",
        "--batch-size",
        "1",
        "--patch-size",
        "32",
        "--lr",
        "1e30",
    ]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("numeric failure"));
}

#[test]
fn every_command_prints_its_resolved_config() {
    let tmp = TempDir::new().unwrap();
    let text = train(&tmp.path().join("run"), "3", None);
    for line in ["[network]", "growth_rate=8", "[train]", "initial_lr=0.001", "seed=7", "[run]", "total_steps=3"] {
        assert!(text.lines().any(|l| l == line), "missing {line}:\n{text}");
    }
    let data = data_dir();
    let text = ok(&["eval", "--hr", s(&data), "--bicubic", "--out", s(&tmp.path().join("e.csv"))]);
    assert!(text.starts_with("[eval]\n") && text.contains("\nborder=4\n"));
}

#[test]
fn training_and_resume_are_byte_reproducible() {
    let tmp = TempDir::new().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    train(&a, "12", None);
    train(&b, "12", None);
    for f in ["latest.adrd", "epoch0002.adrd", "train_log.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_eq!(csv_rows(&a.join("train_log.csv")).len(), 4);

    train(&c, "6", None);
    let text = train(&c, "12", Some(&c.join("latest.adrd")));
    assert!(text.contains("\nstart_step=6\n"));
    assert_eq!(fs::read(a.join("latest.adrd")).unwrap(), fs::read(c.join("latest.adrd")).unwrap());
    assert_eq!(fs::read(a.join("epoch0004.adrd")).unwrap(), fs::read(c.join("epoch0004.adrd")).unwrap());
    assert_eq!(fs::read(a.join("train_log.csv")).unwrap(), fs::read(c.join("train_log.csv")).unwrap());
}

#[test]
fn outputs_repeat_byte_for_byte() {
    let tmp = TempDir::new().unwrap();
    let ck = tiny_checkpoint(tmp.path());
    let data = data_dir();
    for run in ["1", "2"] {
        let dir = tmp.path().join(run);
        ok(&["sr", "--checkpoint", s(&ck), "--input", s(&data), "--output", s(&dir.join("sr"))]);
        ok(&["eval", "--hr", s(&data), "--checkpoint", s(&ck), "--out", s(&dir.join("eval.csv"))]);
        ok(&["noise-eval", "--hr", s(&data), "--checkpoint", s(&ck), "--out", s(&dir.join("noise"))]);
        ok(&["export-weights", "--checkpoint", s(&ck), "--out", s(&dir.join("w.txt"))]);
    }
    let files = ["sr/astronaut.png", "sr/rocket.png", "eval.csv", "noise/noise.csv", "noise/noise_table.txt", "w.txt"];
    for f in files {
        let (x, y) = (tmp.path().join("1").join(f), tmp.path().join("2").join(f));
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{f}");
    }
    let sr = RgbImage::load_png(tmp.path().join("1/sr/coffee.png")).unwrap();
    assert_eq!((sr.width(), sr.height()), (256, 256));
}

#[test]
fn full_checkpoint_upscales_50_to_200() {
    let tmp = TempDir::new().unwrap();
    let ck = tmp.path().join("full.adrd");
    save_checkpoint(&ck, &Network::<f32>::new(NetworkConfig::full()).unwrap(), &KvMap::new(), None).unwrap();
    let lr = RgbImage::load_png(data_dir().join("astronaut.png")).unwrap().crop(7, 3, 50, 50).unwrap();
    let input = tmp.path().join("lr.png");
    lr.save_png(&input).unwrap();
    let output = tmp.path().join("out/sr.png");
    ok(&["sr", "--checkpoint", s(&ck), "--input", s(&input), "--output", s(&output)]);
    let sr = RgbImage::load_png(&output).unwrap();
    assert_eq!((sr.width(), sr.height()), (200, 200));

    let cfg = tmp.path().join("expect.cfg");
    fs::write(&cfg, "growth_rate=32\n").unwrap();
    ok(&["sr", "--checkpoint", s(&ck), "--input", s(&input), "--output", s(&output), "--net-config", s(&cfg)]);
    fs::write(&cfg, "growth_rate=16\n").unwrap();
    let o =
        adrd(&["sr", "--checkpoint", s(&ck), "--input", s(&input), "--output", s(&output), "--net-config", s(&cfg)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("topology"));
}

#[test]
fn tiled_sr_keeps_geometry() {
    let tmp = TempDir::new().unwrap();
    let ck = tiny_checkpoint(tmp.path());
    let input = data_dir().join("hubble.png");
    let (whole, tiled) = (tmp.path().join("whole.png"), tmp.path().join("tiled.png"));
    ok(&["sr", "--checkpoint", s(&ck), "--input", s(&input), "--output", s(&whole)]);
    ok(&["sr", "--checkpoint", s(&ck), "--input", s(&input), "--output", s(&tiled), "--tile", "24", "--overlap", "16"]);
    let (a, b) = (RgbImage::load_png(&whole).unwrap(), RgbImage::load_png(&tiled).unwrap());
    assert_eq!((b.width(), b.height()), (256, 256));
    let max = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0f32, f32::max);
    assert!(max < 0.1, "tile seams differ by {max}");
}

#[test]
fn bicubic_eval_has_zero_rcir() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("bic.csv");
    let data = data_dir();
    ok(&["eval", "--hr", s(&data), "--bicubic", "--out", s(&out)]);
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 6);
    assert_eq!(&rows[5][0], "mean");
    for r in &rows {
        assert!(r[3].parse::<f64>().unwrap().abs() <= 1e-9, "{r:?}");
        assert!(r[1].parse::<f64>().unwrap().is_finite());
    }
}

#[test]
fn noise_eval_sweeps_four_levels() {
    let tmp = TempDir::new().unwrap();
    let data = data_dir();
    let out = tmp.path().join("n");
    ok(&["noise-eval", "--hr", s(&data), "--out", s(&out)]);
    let table = fs::read_to_string(out.join("noise_table.txt")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0].split_whitespace().collect::<Vec<_>>(), ["Level", "Bicubic"]);
    let levels: Vec<&str> = lines[1..].iter().map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(levels, ["5e-5", "1e-4", "2e-4", "5e-4"]);
    assert_eq!(csv_rows(&out.join("noise.csv")).len(), 5 * 4);
    let hr_out = tmp.path().join("h");
    ok(&["noise-eval", "--hr", s(&data), "--out", s(&hr_out), "--noise-on-hr"]);
    assert_ne!(fs::read(out.join("noise.csv")).unwrap(), fs::read(hr_out.join("noise.csv")).unwrap());
}

#[test]
fn ablation_emits_table_rows() {
    let tmp = TempDir::new().unwrap();
    let data = data_dir();
    let out = tmp.path().join("abl");
    let text = ok(&[
        "ablate",
        "--data",
        s(&data),
        "--out",
        s(&out),
        "--steps",
        "2",
        "--growth-rates",
        "4,8",
        "--batch-size",
        "1",
    ]);
    assert!(text.starts_with("[network]\n"));
    let rows = csv_rows(&out.join("ablation.csv"));
    let ids: Vec<(String, String)> = rows.iter().map(|r| (r[0].to_string(), r[1].to_string())).collect();
    let want = [
        ("wdb", "DB-4"),
        ("wdb", "WDB-4"),
        ("wdb", "DB-8"),
        ("wdb", "WDB-8"),
        ("sa", "noSA-4"),
        ("sa", "SA-4"),
        ("sa", "noSA-8"),
        ("sa", "SA-8"),
        ("rd", "D-4"),
        ("rd", "RD-4"),
    ];
    assert_eq!(ids, want.map(|(a, b)| (a.to_string(), b.to_string())));
    // WDB-G, SA-G and RD-G are the same model and share one training run.
    assert_eq!(rows[1].iter().skip(2).collect::<Vec<_>>(), rows[5].iter().skip(2).collect::<Vec<_>>());
    assert_eq!(rows[1].iter().skip(2).collect::<Vec<_>>(), rows[9].iter().skip(2).collect::<Vec<_>>());
    let params = |i: usize| rows[i][3].parse::<usize>().unwrap();
    assert!(params(0) < params(1) && params(4) < params(5) && params(8) < params(9));

    let tables = fs::read_to_string(out.join("tables.txt")).unwrap();
    let header = tables.lines().find(|l| l.starts_with("Index")).unwrap();
    assert_eq!(header.split_whitespace().collect::<Vec<_>>(), ["Index", "DB-4", "WDB-4", "DB-8", "WDB-8"]);
    assert_eq!(tables.lines().filter(|l| l.starts_with("RCIR")).count(), 1);
}

#[test]
fn exported_weights_are_lower_triangular() {
    let tmp = TempDir::new().unwrap();
    let ck = tiny_checkpoint(tmp.path());
    let stdout = ok(&["export-weights", "--checkpoint", s(&ck)]);
    let file = tmp.path().join("w.txt");
    ok(&["export-weights", "--checkpoint", s(&ck), "--out", s(&file)]);
    assert_eq!(fs::read_to_string(&file).unwrap(), stdout);
    let mut groups = 0;
    let mut row = 0;
    for line in stdout.lines() {
        if line.starts_with("# group") {
            groups += 1;
            row = 0;
        } else if !line.is_empty() {
            row += 1;
            let cells: Vec<f64> = line.split('\t').map(|c| c.parse().unwrap()).collect();
            assert_eq!(cells.len(), row);
        }
    }
    assert_eq!(groups, 2);
}
