//! The `watermamba` binary end to end: exit codes, files and printed output.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use watermamba::image_io::{read_rgb8, write_image, Rgb8};
use watermamba::network::{init_weights, ModelConfig};
use watermamba::rng::Rng;
use watermamba::Tensor;

fn watermamba(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_watermamba"))
        .args(args)
        .env_remove("WATERMAMBA_THREADS")
        .output()
        .expect("spawn watermamba")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn random_image(h: usize, w: usize, seed: u64) -> Tensor {
    let mut rng = Rng::new(seed);
    Tensor::from_fn(&[1, 3, h, w], |_| (rng.range(0, 256) as f32) / 255.0)
}

fn small_weights(dir: &Path) -> PathBuf {
    let cfg = dir.join("small.toml");
    let text = ModelConfig {
        widths: [4, 6, 8, 8],
        state: 4,
        ..ModelConfig::default()
    }
    .to_toml();
    std::fs::write(&cfg, text).unwrap();
    let weights = dir.join("small.bin");
    let o = watermamba(&[
        "init-weights",
        "--config",
        s(&cfg),
        "--seed",
        "5",
        "-o",
        s(&weights),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    weights
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(watermamba(&["--help"]).status.code(), Some(0));
    assert_eq!(watermamba(&["--version"]).status.code(), Some(0));
    assert_eq!(watermamba(&[]).status.code(), Some(1));
    assert_eq!(watermamba(&["transmogrify"]).status.code(), Some(1));
    assert_eq!(
        watermamba(&["bench", "--sizes", "100"]).status.code(),
        Some(1)
    );
    assert_eq!(
        watermamba(&["bench", "--sizes", "64", "--repeats", "0"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        watermamba(&["check", "--suite", "everything"])
            .status
            .code(),
        Some(1)
    );
    let bad_env = Command::new(env!("CARGO_BIN_EXE_watermamba"))
        .args(["inspect"])
        .env("WATERMAMBA_THREADS", "lots")
        .output()
        .unwrap();
    assert_eq!(bad_env.status.code(), Some(1));
}

#[test]
fn init_weights_is_seeded_and_matches_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.bin"), dir.path().join("b.bin"));
    let first = watermamba(&["init-weights", "--seed", "9", "-o", s(&a)]);
    let second = watermamba(&["init-weights", "--seed", "9", "-o", s(&b)]);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(second.status.code(), Some(0));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let inspect = watermamba(&["inspect", "--weights", s(&a)]);
    assert_eq!(inspect.status.code(), Some(0));
    let census: Vec<String> = stdout(&first).lines().skip(1).map(str::to_owned).collect();
    for line in &census {
        assert!(stdout(&inspect).contains(line.as_str()), "missing {line:?}");
    }

    let cfg = dir.path().join("bad.toml");
    let mut bad = ModelConfig::default();
    bad.widths[1] = 0;
    std::fs::write(&cfg, bad.to_toml()).unwrap();
    let o = watermamba(&[
        "init-weights",
        "--config",
        s(&cfg),
        "--seed",
        "1",
        "-o",
        s(&a),
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn inspect_reports_budget_scaling_and_ablations() {
    let full = stdout(&watermamba(&["inspect"]));
    assert!(full.contains("parameters 3651837"), "{full}");
    assert!(full.contains("3.69 M") && full.contains("7.53 G") && full.contains("3.53 M"));
    let params = |text: &str| -> u64 {
        let line = text.lines().find(|l| l.starts_with("parameters ")).unwrap();
        line.split_whitespace().nth(1).unwrap().parse().unwrap()
    };
    let macs = |text: &str| -> u64 {
        let line = text.lines().find(|l| l.starts_with("MACs at ")).unwrap();
        line.split_whitespace().nth(3).unwrap().parse().unwrap()
    };
    let big = stdout(&watermamba(&["inspect", "--size", "512", "512"]));
    let ratio = macs(&big) as f64 / macs(&full) as f64;
    assert!((ratio / 4.0 - 1.0).abs() <= 0.02, "{ratio}");
    for flag in ["--no-soss", "--no-ccoss", "--no-msffn"] {
        let o = stdout(&watermamba(&["inspect", flag]));
        assert!(params(&o) < params(&full), "{flag}");
        assert!(macs(&o) < macs(&full), "{flag}");
    }
}

#[test]
fn enhance_pads_crops_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let weights = small_weights(dir.path());
    let input = dir.path().join("in.ppm");
    write_image(&input, &random_image(60, 100, 1)).unwrap();
    let mut outputs = Vec::new();
    for (k, threads) in ["1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("out{k}.png"));
        let o = watermamba(&[
            "--threads",
            threads,
            "enhance",
            "-i",
            s(&input),
            "-o",
            s(&out),
            "-w",
            s(&weights),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let img = read_rgb8(&out).unwrap();
        assert_eq!((img.width, img.height), (100, 60));
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);

    let resized = dir.path().join("resized.png");
    let o = watermamba(&[
        "enhance",
        "-i",
        s(&input),
        "-o",
        s(&resized),
        "-w",
        s(&weights),
        "--resize-256",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let img = read_rgb8(&resized).unwrap();
    assert_eq!((img.width, img.height), (100, 60));

    let exact = watermamba(&[
        "enhance",
        "-i",
        s(&input),
        "-o",
        s(&resized),
        "-w",
        s(&weights),
        "--exact",
    ]);
    assert_eq!(exact.status.code(), Some(1));
    assert!(stderr(&exact).contains("pad"), "{}", stderr(&exact));
}

#[test]
fn zeroed_head_round_trips_8_bit_images() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = init_weights(&ModelConfig::default(), 3).unwrap();
    for name in ["head.weight", "head.bias"] {
        store.get_mut(name).unwrap().map_inplace(|_| 0.0);
    }
    let weights = dir.path().join("identity.bin");
    store.save(&weights).unwrap();
    let input = dir.path().join("in.png");
    write_image(&input, &random_image(36, 44, 2)).unwrap();
    let out = dir.path().join("out.png");
    let o = watermamba(&["enhance", "-i", s(&input), "-o", s(&out), "-w", s(&weights)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (a, b): (Rgb8, Rgb8) = (read_rgb8(&input).unwrap(), read_rgb8(&out).unwrap());
    assert_eq!(a.data, b.data);
}

#[test]
fn io_and_format_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let weights = small_weights(dir.path());
    let missing = dir.path().join("missing.png");
    let out = dir.path().join("out.png");
    let o = watermamba(&[
        "enhance",
        "-i",
        s(&missing),
        "-o",
        s(&out),
        "-w",
        s(&weights),
    ]);
    assert_eq!(o.status.code(), Some(2));

    let mut bytes = std::fs::read(&weights).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    let corrupt = dir.path().join("corrupt.bin");
    std::fs::write(&corrupt, &bytes).unwrap();
    let input = dir.path().join("in.png");
    write_image(&input, &random_image(16, 16, 3)).unwrap();
    let o = watermamba(&["enhance", "-i", s(&input), "-o", s(&out), "-w", s(&corrupt)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("checksum"), "{}", stderr(&o));

    let o = watermamba(&["inspect", "--weights", s(&missing)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn eval_tables_csv_and_warnings() {
    let dir = tempfile::tempdir().unwrap();
    let (imgs, refs) = (dir.path().join("imgs"), dir.path().join("refs"));
    std::fs::create_dir_all(&imgs).unwrap();
    std::fs::create_dir_all(&refs).unwrap();
    for k in 0..3 {
        let x = random_image(24, 32, 10 + k);
        write_image(&imgs.join(format!("{k}.png")), &x).unwrap();
        write_image(
            &refs.join(format!("{k}.png")),
            &x.map(|v| (v * 0.9).clamp(0.0, 1.0)),
        )
        .unwrap();
    }
    std::fs::write(imgs.join("broken.png"), b"not a png").unwrap();

    let csv = dir.path().join("scores.csv");
    let o = watermamba(&[
        "eval",
        "--in",
        s(&imgs),
        "--ref",
        s(&refs),
        "--csv",
        s(&csv),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("broken.png"), "{}", stderr(&o));
    let table = stdout(&o);
    assert!(table.contains("PSNR") && table.contains("UCIQE"));
    assert!(table.contains("mean (n=4)"), "{table}");
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("path,psnr,ssim,uiqm,uciqe\n"), "{text}");
    let report = watermamba::metrics::MetricReport::from_csv(&text).unwrap();
    let psnr = report.mean(watermamba::metrics::Metric::Psnr).unwrap();
    assert!(table.contains(&format!("{psnr:.4}")));

    let strict = watermamba(&["eval", "--in", s(&imgs), "--strict"]);
    assert_eq!(strict.status.code(), Some(2));
    let no_ref = watermamba(&["eval", "--in", s(&imgs), "--metrics", "ssim"]);
    assert_eq!(no_ref.status.code(), Some(1));
    let bad = watermamba(&["eval", "--in", s(&imgs), "--metrics", "sharpness"]);
    assert_eq!(bad.status.code(), Some(1));
    let nodir = watermamba(&["eval", "--in", s(&dir.path().join("nope"))]);
    assert_eq!(nodir.status.code(), Some(2));
}

#[test]
fn check_suites_and_fault_injection() {
    let o = watermamba(&["check", "--suite", "layout"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).lines().filter(|l| l.starts_with("PASS")).count() >= 4);
    let o = watermamba(&["check", "--suite", "lti", "--inject-fault", "broken-taylor"]);
    assert_eq!(o.status.code(), Some(3), "{}", stdout(&o));
    assert!(stdout(&o).contains("FAIL  lti/small-argument-branch"));
    let o = watermamba(&["check", "--suite", "lti", "--inject-fault", "gremlins"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bench_emits_csv() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg_dir, csv) = (dir.path(), dir.path().join("bench.csv"));
    let weights = small_weights(cfg_dir);
    let o = watermamba(&[
        "bench",
        "--sizes",
        "16,32x24",
        "--repeats",
        "1",
        "--weights",
        s(&weights),
        "--csv",
        s(&csv),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "height,width,repeats,median_s,ns_per_pixel,macs");
    assert!(lines[1].starts_with("16,16,1,"));
    assert!(lines[2].starts_with("32,24,1,"));
}
