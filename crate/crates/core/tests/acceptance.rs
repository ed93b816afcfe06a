//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines are always printed; exits nonzero if any fails.

use std::path::Path;
use std::process::Command;

use watermamba::blocks::{BlockConfig, CcossWeights, MsffnWeights, SossWeights};
use watermamba::census::{FlopReport, FlopScope};
use watermamba::cli::{self, bench_size};
use watermamba::metrics::{psnr, ssim, uciqe, uiqm, MetricReport};
use watermamba::network::{count_flops, count_params, init_weights, Model, ModelConfig};
use watermamba::nn::params::Initializer;
use watermamba::nn::Params;
use watermamba::rng::Rng;
use watermamba::selfcheck::{self, Check, Suite, SuiteOptions, DEFAULT_SEED};
use watermamba::{blocks, Tensor};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn suite_outcome(checks: &[Check]) -> Outcome {
    let failed: Vec<_> = checks.iter().filter(|c| !c.passed).collect();
    let detail = checks
        .iter()
        .map(|c| format!("{}: {}", c.name, c.detail))
        .collect::<Vec<_>>()
        .join("; ");
    outcome(failed.is_empty() && !checks.is_empty(), detail)
}

fn run_suite(suite: Suite) -> Vec<Check> {
    selfcheck::run(
        suite,
        &SuiteOptions {
            seed: DEFAULT_SEED,
            ..SuiteOptions::default()
        },
    )
}

fn random(shape: &[usize], rng: &mut Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.normal())
}

fn random_image(h: usize, w: usize, rng: &mut Rng) -> Tensor {
    Tensor::from_fn(&[1, 3, h, w], |_| rng.next_f32())
}

fn zero_conv(c: &mut watermamba::nn::Conv2d) {
    c.weight.map_inplace(|_| 0.0);
    if let Some(b) = c.bias.as_mut() {
        b.map_inplace(|_| 0.0);
    }
}

fn scan_oracle() -> Outcome {
    let checks = run_suite(Suite::ScanOracle);
    let fast: Vec<_> = checks
        .into_iter()
        .filter(|c| c.name == "fast-vs-reference")
        .collect();
    suite_outcome(&fast)
}

fn lti_reduction() -> Outcome {
    suite_outcome(&run_suite(Suite::Lti))
}

fn residual_identities() -> Outcome {
    let mut rng = Rng::new(DEFAULT_SEED);
    let mut soss_exact = true;
    for case in 0..10u64 {
        let c = 2 + (case as usize % 5);
        let mut init = Initializer::new(case);
        let mut w = SossWeights::build(
            &mut Params::new(&mut init),
            "soss",
            c,
            &BlockConfig::default(),
        )
        .expect("soss weights");
        zero_conv(&mut w.out_proj);
        let x = random(&[1, c, 4 + case as usize, 9], &mut rng);
        soss_exact &= blocks::soss_forward(&x, &w).expect("soss forward") == x;
    }

    let mut store = init_weights(&ModelConfig::default(), 7).expect("weights");
    for name in ["head.weight", "head.bias"] {
        store
            .get_mut(name)
            .expect("head tensors")
            .map_inplace(|_| 0.0);
    }
    let model = Model::from_store(&store).expect("model");
    let image = random_image(64, 64, &mut rng);
    let trace = model.forward_trace(&image).expect("forward");
    let net_exact = trace.output == image;

    let live = Model::from_store(&init_weights(&ModelConfig::default(), 8).expect("weights"))
        .expect("model");
    let trace = live.forward_trace(&image).expect("forward");
    let captured = trace.output == trace.residual.add(&image).expect("same shape");

    outcome(
        soss_exact && net_exact && captured,
        format!(
            "SOSS zeroed projection identity on 10 blocks: {soss_exact}; \
             default network with zeroed output conv at 64x64 returns input bit-for-bit: {net_exact}; \
             output == captured residual + input bit-for-bit: {captured}"
        ),
    )
}

fn layout_round_trips() -> Outcome {
    suite_outcome(&run_suite(Suite::Layout))
}

fn parameter_census() -> Outcome {
    let cfg = ModelConfig::default();
    let params = count_params(&cfg).expect("census") as f64;
    let macs = count_flops(&cfg, 256, 256).expect("census").total_macs() as f64;
    let p_dev = params / cli::BUDGET_PARAMS - 1.0;
    let m_dev = macs / cli::BUDGET_MACS_256 - 1.0;

    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = cli::run(["watermamba", "inspect"], &mut out, &mut err);
    let text = String::from_utf8_lossy(&out);
    let reported = text.contains(&format!("parameters {}", params as u64))
        && text.contains(&format!("{}", macs as u64));
    let noted = text.contains("3.53 M");
    outcome(
        p_dev.abs() <= 0.15 && m_dev.abs() <= 0.20 && code == 0 && reported && noted,
        format!(
            "params {params} ({:+.2}% of 3.69M, tol 15%), MACs@256 {macs} ({:+.2}% of 7.53G, tol 20%), \
             inspect reports both: {reported}, notes 3.53M: {noted}",
            100.0 * p_dev,
            100.0 * m_dev
        ),
    )
}

/// Least-squares fit `macs = slope * pixels + intercept` over a sweep of sizes.
fn affine_fit(cfg: &ModelConfig, sizes: &[(usize, usize)]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = sizes
        .iter()
        .map(|&(h, w)| {
            let m = count_flops(cfg, h, w).expect("census").total_macs();
            ((h * w) as f64, m as f64)
        })
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn linear_complexity() -> Outcome {
    let cfg = ModelConfig::default();
    let sizes = [
        (64, 64),
        (128, 128),
        (128, 256),
        (256, 256),
        (384, 256),
        (512, 512),
        (768, 512),
        (1024, 1024),
    ];
    let (slope, intercept) = affine_fit(&cfg, &sizes);
    let at256 = count_flops(&cfg, 256, 256).expect("census").total_macs() as f64;
    let at512 = count_flops(&cfg, 512, 512).expect("census").total_macs() as f64;
    let intercept_rel = intercept.abs() / at256;
    let census_ratio = at512 / at256;

    let model = Model::from_store(&init_weights(&cfg, 0).expect("weights")).expect("model");
    let small = bench_size(&model, 256, 256, 5).expect("bench");
    let large = bench_size(&model, 512, 512, 5).expect("bench");
    let ratio = large.median_s / small.median_s;
    outcome(
        intercept_rel <= 0.02
            && (census_ratio / 4.0 - 1.0).abs() <= 0.02
            && (3.2..=4.8).contains(&ratio),
        format!(
            "fit slope {slope:.1} MACs/pixel, |intercept| {:.3e} of MACs@256 (tol 2%), \
             census 512/256 {census_ratio:.4}; median forward {:.3} s @256, {:.3} s @512 \
             over 5 repeats, ratio {ratio:.3} (want [3.2, 4.8])",
            intercept_rel, small.median_s, large.median_s
        ),
    )
}

fn metrics_oracle() -> Outcome {
    let base = Tensor::from_fn(&[1, 3, 16, 16], |i| (i % 200) as f32 + 20.0);
    let shifted = base.map(|v| v + 16.0);
    let p = psnr(&base, &shifted, 255.0).expect("psnr");
    let mut rng = Rng::new(DEFAULT_SEED);
    let x = random_image(32, 32, &mut rng);
    let s = ssim(&x, &x).expect("ssim");
    let gray = Tensor::full(&[1, 3, 32, 32], 0.4);
    let (q, e) = (uiqm(&gray).expect("uiqm"), uciqe(&gray).expect("uciqe"));
    let direct = (p - 24.048).abs() <= 0.001
        && (s - 1.0).abs() <= 1e-9
        && q.abs() <= 1e-6
        && e.abs() <= 1e-6;
    let suite = suite_outcome(&run_suite(Suite::MetricsOracle));
    outcome(
        direct && suite.passed,
        format!(
            "psnr(+16 @255) {p:.6} dB, ssim(x,x) {s:.12}, UIQM(gray) {q:.3e}, UCIQE(gray) {e:.3e}; {}",
            suite.detail
        ),
    )
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_watermamba"))
}

fn run_bin(args: &[&std::ffi::OsStr]) -> std::process::Output {
    bin().args(args).output().expect("spawn watermamba")
}

fn last_line_values(table: &str) -> Vec<String> {
    let mean = table
        .lines()
        .find(|l| l.starts_with("mean (n="))
        .unwrap_or_default();
    let after = mean.split_once(')').map_or("", |(_, rest)| rest);
    after.split_whitespace().map(str::to_owned).collect()
}

fn end_to_end(dir: &Path) -> Outcome {
    let weights = dir.join("w.bin");
    let init = run_bin(&[
        "init-weights".as_ref(),
        "--seed".as_ref(),
        "3".as_ref(),
        "-o".as_ref(),
        weights.as_os_str(),
    ]);
    if !init.status.success() {
        return outcome(
            false,
            format!(
                "init-weights failed: {}",
                String::from_utf8_lossy(&init.stderr)
            ),
        );
    }
    let mut rng = Rng::new(11);
    let input = dir.join("in.png");
    watermamba::image_io::write_image(&input, &random_image(60, 100, &mut rng))
        .expect("write input");
    let outs = dir.join("out");
    std::fs::create_dir_all(&outs).expect("mkdir");
    let mut bytes = Vec::new();
    for k in 0..2 {
        let path = outs.join(format!("run{k}.png"));
        let r = run_bin(&[
            "enhance".as_ref(),
            "-i".as_ref(),
            input.as_os_str(),
            "-o".as_ref(),
            path.as_os_str(),
            "-w".as_ref(),
            weights.as_os_str(),
        ]);
        if !r.status.success() {
            return outcome(
                false,
                format!("enhance failed: {}", String::from_utf8_lossy(&r.stderr)),
            );
        }
        bytes.push(std::fs::read(&path).expect("read output"));
    }
    let identical = bytes[0] == bytes[1];

    // pair each output with the input it came from
    let refs = dir.join("ref");
    std::fs::create_dir_all(&refs).expect("mkdir");
    for k in 0..2 {
        std::fs::copy(&input, refs.join(format!("run{k}.png"))).expect("copy reference");
    }
    let csv = dir.join("eval.csv");
    let r = run_bin(&[
        "eval".as_ref(),
        "--in".as_ref(),
        outs.as_os_str(),
        "--ref".as_ref(),
        refs.as_os_str(),
        "--csv".as_ref(),
        csv.as_os_str(),
    ]);
    let printed = last_line_values(&String::from_utf8_lossy(&r.stdout));
    let report = MetricReport::from_csv(&std::fs::read_to_string(&csv).unwrap_or_default());
    let reparsed: Vec<String> = match &report {
        Ok(rep) => rep
            .metrics
            .iter()
            .map(|&m| watermamba::metrics::format_cell(rep.mean(m), 4))
            .collect(),
        Err(_) => Vec::new(),
    };
    let agrees = r.status.success() && !printed.is_empty() && printed == reparsed;
    outcome(
        identical && agrees,
        format!(
            "two enhance runs on a 100x60 input byte-identical: {identical} ({} bytes); \
             printed means {printed:?}, CSV reparse {reparsed:?}",
            bytes[0].len()
        ),
    )
}

/// The analytic counts of one sub-block summed over the eight SCOSS blocks.
fn sub_block_census(
    cfg: &ModelConfig,
    h: usize,
    w: usize,
    params: impl Fn(usize, &BlockConfig) -> usize,
    macs: impl Fn(&mut FlopScope, usize, &BlockConfig, usize, usize),
) -> (usize, u64) {
    let block = cfg.block();
    let c = cfg.widths;
    // (channels, downsampling level) of enc1..3, bottleneck, dec1..3, refine
    let sites = [
        (c[1], 1),
        (c[2], 2),
        (c[3], 3),
        (c[3], 3),
        (c[0], 0),
        (c[1], 1),
        (c[2], 2),
        (c[0], 0),
    ];
    let mut report = FlopReport::default();
    let mut scope = FlopScope::new(&mut report);
    let mut p = 0;
    for (ch, level) in sites {
        p += params(ch, &block);
        macs(&mut scope, ch, &block, h >> level, w >> level);
    }
    drop(scope);
    (p, report.total_macs())
}

fn ablation_structure() -> Outcome {
    let full = ModelConfig::default();
    let (h, w) = (256, 256);
    let p_full = count_params(&full).expect("census");
    let m_full = count_flops(&full, h, w).expect("census").total_macs();
    let mut ok = true;
    let mut parts = Vec::new();
    type Toggle = fn(&mut ModelConfig);
    let cases: [(&str, Toggle, (usize, u64)); 3] = [
        (
            "soss",
            |c| c.use_soss = false,
            sub_block_census(
                &full,
                h,
                w,
                SossWeights::param_count,
                SossWeights::count_macs,
            ),
        ),
        (
            "ccoss",
            |c| c.use_ccoss = false,
            sub_block_census(
                &full,
                h,
                w,
                CcossWeights::param_count,
                CcossWeights::count_macs,
            ),
        ),
        (
            "msffn",
            |c| c.use_msffn = false,
            sub_block_census(
                &full,
                h,
                w,
                MsffnWeights::param_count,
                MsffnWeights::count_macs,
            ),
        ),
    ];
    for (name, toggle, (p_sub, m_sub)) in cases {
        let mut cfg = full.clone();
        toggle(&mut cfg);
        let dp = p_full - count_params(&cfg).expect("census");
        let dm = m_full - count_flops(&cfg, h, w).expect("census").total_macs();
        ok &= dp == p_sub && dm == m_sub;
        parts.push(format!(
            "w/o {name}: -{dp} params (analytic {p_sub}), -{dm} MACs (analytic {m_sub})"
        ));
    }
    outcome(ok, parts.join("; "))
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let criteria: [Criterion; 9] = [
        ("1 scan oracle", Box::new(scan_oracle)),
        ("2 LTI reduction", Box::new(lti_reduction)),
        ("3 residual identities", Box::new(residual_identities)),
        ("4 layout round trips", Box::new(layout_round_trips)),
        ("5 parameter census", Box::new(parameter_census)),
        ("6 linear complexity", Box::new(linear_complexity)),
        ("7 metrics oracles", Box::new(metrics_oracle)),
        (
            "8 end-to-end determinism",
            Box::new(|| end_to_end(tmp.path())),
        ),
        ("9 ablation structure", Box::new(ablation_structure)),
    ];
    let mut failed = 0;
    for (name, criterion) in &criteria {
        let o = criterion();
        failed += usize::from(!o.passed);
        println!(
            "{}  {name}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
