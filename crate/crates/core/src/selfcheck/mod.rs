//! Seeded property suites behind `watermamba check`.
//!
//! Each suite returns one [`Check`] per property, with the measured error or
//! counterexample in `detail`.

pub mod oracles;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::blocks::{soss_forward, BlockConfig, SossWeights};
use crate::error::{Error, Result};
use crate::layout::{coordinate_concat, coordinate_split, flatten, unflatten, ScanDirection};
use crate::metrics::{psnr, ssim, uciqe, uiqm, uiqm_components};
use crate::network::{init_weights, Model, ModelConfig};
use crate::nn::params::{Initializer, Params};
use crate::rng::Rng;
use crate::ssm::{
    exp_f32, selective_scan_assoc, selective_scan_fast, selective_scan_fast_with,
    selective_scan_ref, BbarRule, Discretizer, ScanInput, SsmParams, Zoh, TAYLOR_SWITCH,
};
use crate::tensor::Tensor;

pub const DEFAULT_SEED: u64 = 20_240_611;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    ScanOracle,
    Lti,
    Residual,
    Layout,
    MetricsOracle,
    All,
}

impl Suite {
    pub const EACH: [Suite; 5] = [
        Suite::ScanOracle,
        Suite::Lti,
        Suite::Residual,
        Suite::Layout,
        Suite::MetricsOracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::ScanOracle => "scan-oracle",
            Suite::Lti => "lti",
            Suite::Residual => "residual",
            Suite::Layout => "layout",
            Suite::MetricsOracle => "metrics-oracle",
            Suite::All => "all",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::EACH
            .into_iter()
            .chain([Suite::All])
            .find(|x| x.name() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown suite `{s}` (expected scan-oracle, lti, residual, layout, \
                     metrics-oracle or all)"
                ))
            })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug)]
pub struct Check {
    pub suite: Suite,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(
            f,
            "{verdict}  {}/{}  {}",
            self.suite, self.name, self.detail
        )
    }
}

fn check(suite: Suite, name: &str, passed: bool, detail: String) -> Check {
    Check {
        suite,
        name: name.to_string(),
        passed,
        detail,
    }
}

/// Coefficient source for the LTI suite. The production rule is [`Zoh`];
/// tests swap in deliberately broken rules to prove the suite notices.
pub type DiscretizerRef<'a> = &'a dyn Discretizer;

/// ZOH with the small-argument branch replaced by zero: a mutation fixture.
#[derive(Clone, Copy, Debug, Default)]
pub struct BrokenTaylor;

impl Discretizer for BrokenTaylor {
    fn coefficients(&self, delta: f32, a: f32) -> (f32, f32) {
        let z = delta * a;
        if (z.abs() as f64) < TAYLOR_SWITCH {
            (exp_f32(z), 0.0)
        } else {
            Zoh.coefficients(delta, a)
        }
    }
}

#[derive(Clone, Copy)]
pub struct SuiteOptions<'a> {
    pub seed: u64,
    pub discretizer: DiscretizerRef<'a>,
}

impl Default for SuiteOptions<'_> {
    fn default() -> Self {
        SuiteOptions {
            seed: DEFAULT_SEED,
            discretizer: &Zoh,
        }
    }
}

pub fn run(suite: Suite, opts: &SuiteOptions) -> Vec<Check> {
    match suite {
        Suite::ScanOracle => scan_oracle(opts.seed),
        Suite::Lti => lti(opts.seed, opts.discretizer),
        Suite::Residual => residual(opts.seed),
        Suite::Layout => layout(opts.seed),
        Suite::MetricsOracle => metrics_oracle(opts.seed),
        Suite::All => Suite::EACH.iter().flat_map(|&s| run(s, opts)).collect(),
    }
}

/// Owned operands for one random scan instance.
pub struct ScanCase {
    pub dims: (usize, usize, usize, usize),
    pub u: Vec<f32>,
    pub delta: Vec<f32>,
    pub b: Vec<f32>,
    pub c: Vec<f32>,
    pub params: SsmParams,
}

impl ScanCase {
    pub fn input(&self) -> ScanInput<'_> {
        ScanInput::new(self.dims, &self.u, &self.delta, &self.b, &self.c)
            .expect("generated operands are consistent")
    }

    /// Random selective operands: `delta` log-uniform in `[1e-3, 1]`, stable
    /// `A` spread around `-(1..=N)`.
    pub fn random(rng: &mut Rng, max_len: usize, max_state: usize) -> ScanCase {
        let batch = rng.range(1, 3);
        let channels = rng.range(1, 4);
        let state = rng.range(1, max_state + 1);
        let len = (max_len as f64).powf(rng.next_f64()).round().max(1.0) as usize;
        let seq = batch * channels * len;
        let proj = batch * state * len;
        let u = (0..seq).map(|_| rng.normal()).collect();
        let delta = (0..seq)
            .map(|_| 10f32.powf(rng.uniform(-3.0, 0.0)))
            .collect();
        let b = (0..proj).map(|_| rng.normal()).collect();
        let c = (0..proj).map(|_| rng.normal()).collect();
        let a_log = Tensor::from_fn(&[channels, state], |i| {
            (((i % state) + 1) as f32).ln() + rng.uniform(-0.5, 0.5)
        });
        let d_skip = Tensor::from_fn(&[channels], |_| rng.normal());
        let rule = if rng.next_f32() < 0.8 {
            BbarRule::Zoh
        } else {
            BbarRule::Euler
        };
        ScanCase {
            dims: (batch, channels, state, len),
            u,
            delta,
            b,
            c,
            params: SsmParams::new(a_log, d_skip, rule).expect("consistent params"),
        }
    }
}

fn max_abs_diff(a: &[f32], b: &[f32]) -> f32 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f32::max)
}

/// Fast and associative scans against the per-step reference.
pub fn scan_oracle(seed: u64) -> Vec<Check> {
    const INSTANCES: usize = 1000;
    const TOL: f32 = 1e-5;
    let mut rng = Rng::new(seed);
    let start = Instant::now();
    let mut worst = 0.0f32;
    let mut longest = 0;
    let mut widest = 0;
    for i in 0..INSTANCES {
        // pin the extremes so every run covers L = 4096 and N = 32
        let case = match i {
            0 => pinned(&mut rng, 4096, 32, BbarRule::Zoh),
            1 => pinned(&mut rng, 4096, 32, BbarRule::Euler),
            _ => ScanCase::random(&mut rng, 4096, 32),
        };
        let input = case.input();
        let want = selective_scan_ref(&input, &case.params).expect("valid case");
        let got = selective_scan_fast(&input, &case.params).expect("valid case");
        worst = worst.max(max_abs_diff(&got, &want));
        longest = longest.max(case.dims.3);
        widest = widest.max(case.dims.2);
    }
    let secs = start.elapsed().as_secs_f64();
    let mut out = vec![check(
        Suite::ScanOracle,
        "fast-vs-reference",
        worst <= TOL && secs < 60.0,
        format!(
            "{INSTANCES} instances (L <= {longest}, N <= {widest}): max |err| {worst:.3e} \
             (tol {TOL:e}), {secs:.2} s (limit 60 s)"
        ),
    )];

    let mut worst = 0.0f32;
    let mut identical = true;
    for _ in 0..100 {
        let case = ScanCase::random(&mut rng, 1024, 16);
        let input = case.input();
        let want = selective_scan_ref(&input, &case.params).expect("valid case");
        let assoc = selective_scan_assoc(&input, &case.params, 64).expect("valid case");
        worst = worst.max(max_abs_diff(&assoc, &want));
        let base = selective_scan_fast(&input, &case.params).expect("valid case");
        for chunk in [1, 7, 256, 5000] {
            let other = match case.params.rule {
                BbarRule::Zoh => selective_scan_fast_with(&input, &case.params, &Zoh, chunk),
                BbarRule::Euler => {
                    selective_scan_fast_with(&input, &case.params, &crate::ssm::Euler, chunk)
                }
            }
            .expect("valid case");
            identical &= other == base;
        }
    }
    out.push(check(
        Suite::ScanOracle,
        "associative-vs-reference",
        worst <= 1e-4,
        format!("100 instances: max |err| {worst:.3e} (tol 1e-4)"),
    ));
    out.push(check(
        Suite::ScanOracle,
        "chunk-length-invariance",
        identical,
        "chunks 1, 7, 64, 256, 5000 bit-identical on 100 instances".into(),
    ));
    out
}

fn pinned(rng: &mut Rng, len: usize, state: usize, rule: BbarRule) -> ScanCase {
    let (batch, channels) = (1, 2);
    let seq = batch * channels * len;
    let proj = batch * state * len;
    ScanCase {
        dims: (batch, channels, state, len),
        u: (0..seq).map(|_| rng.normal()).collect(),
        delta: (0..seq)
            .map(|_| 10f32.powf(rng.uniform(-3.0, 0.0)))
            .collect(),
        b: (0..proj).map(|_| rng.normal()).collect(),
        c: (0..proj).map(|_| rng.normal()).collect(),
        params: SsmParams::new(
            Tensor::from_fn(&[channels, state], |i| (((i % state) + 1) as f32).ln()),
            Tensor::from_fn(&[channels], |_| rng.normal()),
            rule,
        )
        .expect("consistent params"),
    }
}

/// Time-invariant instance: `u` varies, `delta`, `B`, `C` are constant in time.
struct LtiCase {
    scan: ScanCase,
    /// Per channel step.
    delta: Vec<f64>,
    /// Per state entry.
    b: Vec<f64>,
    c: Vec<f64>,
}

fn lti_case(rng: &mut Rng, tiny: bool) -> LtiCase {
    let channels = rng.range(1, 4);
    let (state, len) = if tiny {
        (rng.range(1, 9), rng.range(1, 129))
    } else {
        (rng.range(1, 17), rng.range(1, 257))
    };
    let deltas: Vec<f32> = (0..channels)
        .map(|_| {
            if tiny {
                rng.uniform(0.1, 1.0)
            } else {
                10f32.powf(rng.uniform(-3.0, 0.0))
            }
        })
        .collect();
    let b: Vec<f32> = (0..state).map(|_| 0.5 * rng.normal()).collect();
    let c: Vec<f32> = (0..state).map(|_| 0.5 * rng.normal()).collect();
    // tiny: |delta * A| in [1e-7, 1e-5], inside the small-argument branch
    let a_log = Tensor::from_fn(&[channels, state], |i| {
        if tiny {
            rng.uniform(-16.0, -11.6)
        } else {
            (((i % state) + 1) as f32).ln()
        }
    });
    let params = SsmParams::new(
        a_log,
        Tensor::from_fn(&[channels], |_| rng.normal()),
        BbarRule::Zoh,
    )
    .expect("consistent params");
    let u = (0..channels * len).map(|_| rng.normal()).collect();
    let delta = (0..channels * len).map(|i| deltas[i / len]).collect();
    let bt = (0..state * len).map(|i| b[i / len]).collect();
    let ct = (0..state * len).map(|i| c[i / len]).collect();
    LtiCase {
        scan: ScanCase {
            dims: (1, channels, state, len),
            u,
            delta,
            b: bt,
            c: ct,
            params,
        },
        delta: deltas.iter().map(|&v| v as f64).collect(),
        b: b.iter().map(|&v| v as f64).collect(),
        c: c.iter().map(|&v| v as f64).collect(),
    }
}

/// `y = K * u + D u` with `K_k = sum_n C_n Abar_n^k Bbar_n`, all in `f64`,
/// `Bbar = expm1(delta a) / a * B`.
fn lti_oracle(case: &LtiCase) -> Vec<f64> {
    let (_, channels, state, len) = case.scan.dims;
    let mut y = vec![0.0; channels * len];
    for d in 0..channels {
        let dt = case.delta[d];
        let mut kernel = vec![0.0; len];
        for n in 0..state {
            let a = -(case.scan.params.a_log.data()[d * state + n] as f64).exp();
            let a_bar = (dt * a).exp();
            let b_bar = (dt * a).exp_m1() / a * case.b[n];
            let mut power = 1.0;
            for k in kernel.iter_mut() {
                *k += case.c[n] * power * b_bar;
                power *= a_bar;
            }
        }
        let skip = case.scan.params.d_skip.data()[d] as f64;
        let u = &case.scan.u[d * len..(d + 1) * len];
        for t in 0..len {
            let conv: f64 = (0..=t).map(|s| kernel[t - s] * u[s] as f64).sum();
            y[d * len + t] = conv + skip * u[t] as f64;
        }
    }
    y
}

/// Constant-parameter scans against explicit kernel convolution.
pub fn lti(seed: u64, disc: DiscretizerRef) -> Vec<Check> {
    const INSTANCES: usize = 100;
    const TOL: f64 = 1e-4;
    let mut rng = Rng::new(seed.wrapping_add(1));
    let mut worst = 0.0f64;
    let mut worst_tiny = 0.0f64;
    for i in 0..INSTANCES {
        let tiny = i % 3 == 0;
        let case = lti_case(&mut rng, tiny);
        let want = lti_oracle(&case);
        let got = selective_scan_fast_with(&case.scan.input(), &case.scan.params, disc, 64)
            .expect("valid case");
        let err = got
            .iter()
            .zip(&want)
            .map(|(&g, &w)| (g as f64 - w).abs())
            .fold(0.0, f64::max);
        if tiny {
            worst_tiny = worst_tiny.max(err);
        } else {
            worst = worst.max(err);
        }
    }
    vec![
        check(
            Suite::Lti,
            "kernel-convolution",
            worst <= TOL,
            format!(
                "{} instances: max |err| {worst:.3e} (tol {TOL:e})",
                INSTANCES * 2 / 3
            ),
        ),
        check(
            Suite::Lti,
            "small-argument-branch",
            worst_tiny <= TOL,
            format!(
                "{} instances with |delta*A| < {TAYLOR_SWITCH:e}: max |err| {worst_tiny:.3e} \
                 (tol {TOL:e})",
                INSTANCES.div_ceil(3)
            ),
        ),
    ]
}

fn random_tensor(rng: &mut Rng, shape: &[usize]) -> Tensor {
    Tensor::from_fn(shape, |_| rng.normal())
}

fn random_image(rng: &mut Rng, h: usize, w: usize) -> Tensor {
    // 8-bit levels, like decoded files
    Tensor::from_fn(&[1, 3, h, w], |_| rng.range(0, 256) as f32 / 255.0)
}

/// Residual identities are exact.
pub fn residual(seed: u64) -> Vec<Check> {
    let mut rng = Rng::new(seed.wrapping_add(2));
    let mut out = Vec::new();

    let mut ok = true;
    for i in 0..10 {
        let c = rng.range(1, 9);
        let mut init = Initializer::new(seed + i);
        let mut block = SossWeights::build(
            &mut Params::new(&mut init),
            "soss",
            c,
            &BlockConfig::default(),
        )
        .expect("valid block");
        block.out_proj.weight.map_inplace(|_| 0.0);
        if let Some(b) = block.out_proj.bias.as_mut() {
            b.map_inplace(|_| 0.0);
        }
        let (h, w) = (rng.range(1, 13), rng.range(1, 13));
        let x = random_tensor(&mut rng, &[1, c, h, w]);
        ok &= soss_forward(&x, &block).expect("valid input") == x;
    }
    out.push(check(
        Suite::Residual,
        "soss-zero-projection",
        ok,
        "10 random blocks: output equals input bit-for-bit".into(),
    ));

    let configs = [
        ("default", ModelConfig::default(), 16usize, 16usize),
        (
            "small",
            ModelConfig {
                widths: [4, 6, 8, 8],
                state: 4,
                ..ModelConfig::default()
            },
            24,
            40,
        ),
    ];
    for (label, cfg, h, w) in configs {
        let mut store = init_weights(&cfg, seed).expect("valid config");
        let img = random_image(&mut rng, h, w);
        let model = Model::from_store(&store).expect("consistent store");
        let trace = model.forward_trace(&img).expect("valid image");
        let captured = trace.output == trace.residual.add(&img).expect("same shape");
        out.push(check(
            Suite::Residual,
            &format!("residual-capture-{label}"),
            captured,
            format!("{h}x{w}: output equals captured head output + input bit-for-bit"),
        ));
        for name in ["head.weight", "head.bias"] {
            if let Some(t) = store.get_mut(name) {
                t.map_inplace(|_| 0.0);
            }
        }
        let model = Model::from_store(&store).expect("consistent store");
        let same = model.forward(&img).expect("valid image") == img;
        out.push(check(
            Suite::Residual,
            &format!("zero-head-{label}"),
            same,
            format!("{h}x{w}: zeroed output convolution returns the input bit-for-bit"),
        ));
    }
    out
}

/// Scan orders and coordinate packing are exact inverses.
pub fn layout(seed: u64) -> Vec<Check> {
    const SHAPES: usize = 500;
    let mut rng = Rng::new(seed.wrapping_add(3));
    let mut round_trip = true;
    let mut bijective = true;
    let mut reversal = true;
    let mut packing = true;
    let mut first_bad = None;
    for _ in 0..SHAPES {
        let (n, c) = (rng.range(1, 3), rng.range(1, 4));
        let (h, w) = (rng.range(1, 65), rng.range(1, 65));
        let x = random_tensor(&mut rng, &[n, c, h, w]);
        for dir in ScanDirection::ALL {
            let seq = flatten(&x, dir).expect("4-d input");
            let back = unflatten(&seq, dir, h, w).expect("matching sizes");
            if back != x {
                round_trip = false;
                first_bad.get_or_insert(format!("{dir:?} at {h}x{w}"));
            }
            let mut seen = vec![false; h * w];
            for p in dir.permutation(h, w) {
                bijective &= p < h * w && !std::mem::replace(&mut seen[p], true);
            }
        }
        let last = h * w - 1;
        let fwd = ScanDirection::RowMajor.permutation(h, w);
        let rev = ScanDirection::RowMajorRev.permutation(h, w);
        let col = ScanDirection::ColumnMajor.permutation(h, w);
        let col_rev = ScanDirection::ColumnMajorRev.permutation(h, w);
        reversal &= fwd.iter().zip(&rev).all(|(a, b)| a + b == last);
        reversal &= col.iter().zip(&col_rev).all(|(a, b)| a + b == last);

        let yh = random_tensor(&mut rng, &[n, c, 1, w]);
        let yw = random_tensor(&mut rng, &[n, c, h, 1]);
        let joined = coordinate_concat(&yh, &yw).expect("matching pooled maps");
        let (bh, bw) = coordinate_split(&joined, w).expect("valid split");
        packing &= joined.shape() == [n, c, 1, h + w] && bh == yh && bw == yw;
    }
    let note = |ok: bool| {
        if ok {
            format!("{SHAPES} random shapes up to 64x64")
        } else {
            first_bad.clone().unwrap_or_else(|| "mismatch".into())
        }
    };
    vec![
        check(
            Suite::Layout,
            "direction-round-trip",
            round_trip,
            note(round_trip),
        ),
        check(
            Suite::Layout,
            "direction-bijection",
            bijective,
            note(bijective),
        ),
        check(
            Suite::Layout,
            "reversed-directions",
            reversal,
            note(reversal),
        ),
        check(
            Suite::Layout,
            "coordinate-concat-split",
            packing,
            note(packing),
        ),
    ]
}

fn flip_h(img: &Tensor) -> Tensor {
    let s = img.shape();
    let (h, w) = (s[s.len() - 2], s[s.len() - 1]);
    Tensor::from_fn(s, |i| {
        let (plane, r, c) = (i / (h * w), (i / w) % h, i % w);
        img.data()[(plane * h + r) * w + (w - 1 - c)]
    })
}

fn rotate_180(img: &Tensor) -> Tensor {
    let plane = img.shape()[img.rank() - 2] * img.shape()[img.rank() - 1];
    Tensor::from_fn(img.shape(), |i| {
        let (p, k) = (i / plane, i % plane);
        img.data()[p * plane + plane - 1 - k]
    })
}

/// Closed-form metric values and agreement with the brute-force oracles.
pub fn metrics_oracle(seed: u64) -> Vec<Check> {
    const IMAGES: usize = 50;
    const TOL: f64 = 1e-6;
    let mut rng = Rng::new(seed.wrapping_add(4));
    let mut out = Vec::new();

    let a = Tensor::from_fn(&[3, 8, 8], |i| (i % 200) as f32);
    let b = a.map(|v| v + 16.0);
    let closed = psnr(&a, &b, 255.0).expect("same shape");
    out.push(check(
        Suite::MetricsOracle,
        "psnr-closed-form",
        (closed - 24.048).abs() <= 1e-3,
        format!("+16 offset at peak 255: {closed:.6} dB (want 24.048 +- 0.001)"),
    ));

    let base = random_image(&mut rng, 16, 16);
    let mut last = f64::INFINITY;
    let mut monotone = true;
    for k in 1..=8 {
        let noisy = Tensor::from_fn(base.shape(), |i| {
            base.data()[i] + if i % 3 == 0 { 0.01 * k as f32 } else { 0.0 }
        });
        let v = psnr(&base, &noisy, 1.0).expect("same shape");
        monotone &= v < last;
        last = v;
    }
    out.push(check(
        Suite::MetricsOracle,
        "psnr-monotone",
        monotone,
        "8 nested perturbations: PSNR strictly decreasing".into(),
    ));

    let mut worst_self = 0.0f64;
    let mut worst_sym = 0.0f64;
    let mut bounded = true;
    for _ in 0..10 {
        let (h, w) = (rng.range(11, 33), rng.range(11, 33));
        let x = random_image(&mut rng, h, w);
        let y = random_image(&mut rng, h, w);
        worst_self = worst_self.max((ssim(&x, &x).expect("same shape") - 1.0).abs());
        let (xy, yx) = (
            ssim(&x, &y).expect("same shape"),
            ssim(&y, &x).expect("same shape"),
        );
        worst_sym = worst_sym.max((xy - yx).abs());
        bounded &= xy <= 1.0;
    }
    out.push(check(
        Suite::MetricsOracle,
        "ssim-identity",
        worst_self <= 1e-9,
        format!("10 images: max |ssim(x,x) - 1| {worst_self:.3e} (tol 1e-9)"),
    ));
    out.push(check(
        Suite::MetricsOracle,
        "ssim-symmetry",
        worst_sym <= 1e-12 && bounded,
        format!("10 pairs: max asymmetry {worst_sym:.3e} (tol 1e-12), all <= 1"),
    ));

    let mut worst_const = 0.0f64;
    for level in [0.0, 0.2, 0.5, 0.8, 1.0] {
        let gray = Tensor::full(&[1, 3, 16, 24], level);
        let c = uiqm_components(&gray).expect("rgb image");
        for v in [
            c.uicm,
            c.uism,
            c.uiconm,
            c.total(),
            uciqe(&gray).expect("rgb image"),
        ] {
            worst_const = worst_const.max(v.abs());
        }
    }
    out.push(check(
        Suite::MetricsOracle,
        "constant-gray-zero",
        worst_const <= TOL,
        format!("5 gray levels: max |UIQM parts, UCIQE| {worst_const:.3e} (tol {TOL:e})"),
    ));

    let mut worst_uiqm = 0.0f64;
    let mut worst_uciqe = 0.0f64;
    let mut worst_flip = 0.0f64;
    for _ in 0..IMAGES {
        let (h, w) = (rng.range(8, 41), rng.range(8, 41));
        let img = random_image(&mut rng, h, w);
        let q = uiqm(&img).expect("rgb image");
        let e = uciqe(&img).expect("rgb image");
        worst_uiqm = worst_uiqm.max((q - oracles::uiqm(&img)).abs());
        worst_uciqe = worst_uciqe.max((e - oracles::uciqe(&img)).abs());

        // flips keep the block grid only when it tiles the image
        let (h8, w8) = (8 * rng.range(1, 5), 8 * rng.range(1, 5));
        let tiled = random_image(&mut rng, h8, w8);
        let (q0, e0) = (uiqm(&tiled).expect("rgb"), uciqe(&tiled).expect("rgb"));
        for t in [flip_h(&tiled), rotate_180(&tiled)] {
            worst_flip = worst_flip
                .max((uiqm(&t).expect("rgb") - q0).abs())
                .max((uciqe(&t).expect("rgb") - e0).abs());
        }
    }
    out.push(check(
        Suite::MetricsOracle,
        "uiqm-vs-oracle",
        worst_uiqm <= TOL,
        format!("{IMAGES} images: max |diff| {worst_uiqm:.3e} (tol {TOL:e})"),
    ));
    out.push(check(
        Suite::MetricsOracle,
        "uciqe-vs-oracle",
        worst_uciqe <= TOL,
        format!("{IMAGES} images: max |diff| {worst_uciqe:.3e} (tol {TOL:e})"),
    ));
    out.push(check(
        Suite::MetricsOracle,
        "flip-rotation-invariance",
        worst_flip <= TOL,
        format!("{IMAGES} images, h-flip and 180 rotation: max change {worst_flip:.3e}"),
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_metrics_suites_pass() {
        for c in layout(1).into_iter().chain(metrics_oracle(1)) {
            assert!(c.passed, "{c}");
        }
    }

    #[test]
    fn lti_suite_passes_and_catches_a_broken_small_branch() {
        assert!(lti(2, &Zoh).iter().all(|c| c.passed));
        let broken = lti(2, &BrokenTaylor);
        let small = broken
            .iter()
            .find(|c| c.name == "small-argument-branch")
            .unwrap();
        assert!(!small.passed, "{small}");
    }

    #[test]
    fn suite_names_parse() {
        for s in Suite::EACH.into_iter().chain([Suite::All]) {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }
}
