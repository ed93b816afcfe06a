//! Selective state-space scan.
//!
//! Continuous system `h' = A h + B x`, `y = C h + D x` with diagonal `A < 0`,
//! discretized per step with the zero-order hold:
//!
//! ```text
//! A_bar = exp(delta * a)
//! B_bar = (delta * a)^-1 (exp(delta * a) - 1) * delta * b  =  delta * phi(delta * a) * b
//! phi(z) = (e^z - 1) / z,   phi(z) ~ 1 + z/2 + z^2/6  for |z| < 1e-4
//! ```
//!
//! and scanned as `h_t = A_bar_t h_{t-1} + B_bar_t x_t`, `y_t = C_t . h_t + D x_t`
//! from `h_0 = 0`. In the selective (S6) form `delta`, `B` and `C` are
//! per-step projections of the input.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{flush_subnormal, softplus, Conv2d, ConvSpec, Init, Params};
use crate::tensor::Tensor;

/// Below this `|delta * a|` the ZOH factor uses its Taylor expansion.
pub const TAYLOR_SWITCH: f64 = 1e-4;

/// Default chunk length of [`selective_scan_fast`].
pub const DEFAULT_CHUNK: usize = 64;

/// Input-matrix discretization rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BbarRule {
    /// Exact zero-order hold: `B_bar = delta * phi(delta * a) * b`.
    #[default]
    Zoh,
    /// First-order simplification: `B_bar = delta * b`.
    Euler,
}

/// Per-step discretization coefficients `(A_bar, s)` with `B_bar = s * b`.
pub trait Discretizer: Sync {
    fn coefficients(&self, delta: f32, a: f32) -> (f32, f32);
}

/// `e^x` in `f32`, branch-free so loops over it vectorize.
///
/// Range reduction `x = n ln2 + r` with `|r| <= ln2 / 2`, then a degree-7
/// polynomial for `e^r`; relative error below `2e-7` on `[-87, 88]`.
#[inline(always)]
pub fn exp_f32(x: f32) -> f32 {
    const ROUND: f32 = 12_582_912.0; // 1.5 * 2^23
    let x = snap_tiny(x).clamp(-87.0, 88.0);
    let shifted = x * std::f32::consts::LOG2_E + ROUND;
    let n = shifted - ROUND;
    // the low mantissa bits of `shifted` hold n in two's complement
    let pow2 = f32::from_bits(
        shifted
            .to_bits()
            .wrapping_sub(ROUND.to_bits())
            .wrapping_add(127)
            << 23,
    );
    let r = (x - n * 0.693_359_4) - n * -2.121_944_4e-4;
    let mut p = 1.987_569_1e-4f32;
    p = p * r + 1.398_199_9e-3;
    p = p * r + 8.333_452e-3;
    p = p * r + 4.166_579_6e-2;
    p = p * r + 0.166_666_65;
    p = p * r + 0.5;
    let er = p * r * r + r + 1.0;
    er * pow2
}

/// Arguments this small give exactly 1 from both [`exp_f32`] and
/// [`zoh_phi`], but squaring them would produce subnormals, which are very
/// slow on common CPUs. Returning zero keeps the result and drops the cost.
#[inline(always)]
fn snap_tiny(z: f32) -> f32 {
    if z.abs() < 1e-18 {
        0.0
    } else {
        z
    }
}

/// `(e^z - 1) / z` in `f32`: the short series below [`TAYLOR_SWITCH`], a
/// degree-7 series for `|z| <= 1/2` (where subtracting 1 would cancel), and
/// the direct quotient beyond.
#[inline(always)]
pub fn zoh_phi(z: f32) -> f32 {
    let z = snap_tiny(z);
    let short = 1.0 + z * (0.5 + z * (1.0 / 6.0));
    let mut series = 1.0 / 40_320.0f32;
    for c in [5_040.0f32, 720.0, 120.0, 24.0, 6.0, 2.0, 1.0] {
        series = series * z + 1.0 / c;
    }
    let direct = (exp_f32(z) - 1.0) / z;
    let az = z.abs();
    if az < TAYLOR_SWITCH as f32 {
        short
    } else if az <= 0.5 {
        series
    } else {
        direct
    }
}

/// Zero-order hold coefficients.
#[derive(Clone, Copy, Debug, Default)]
pub struct Zoh;

/// `B_bar = delta * b`; `A_bar` is still the exact exponential.
#[derive(Clone, Copy, Debug, Default)]
pub struct Euler;

impl Discretizer for Zoh {
    #[inline(always)]
    fn coefficients(&self, delta: f32, a: f32) -> (f32, f32) {
        let z = delta * a;
        (exp_f32(z), delta * zoh_phi(z))
    }
}

impl Discretizer for Euler {
    #[inline(always)]
    fn coefficients(&self, delta: f32, a: f32) -> (f32, f32) {
        (exp_f32(delta * a), delta)
    }
}

impl Discretizer for BbarRule {
    #[inline(always)]
    fn coefficients(&self, delta: f32, a: f32) -> (f32, f32) {
        match self {
            BbarRule::Zoh => Zoh.coefficients(delta, a),
            BbarRule::Euler => Euler.coefficients(delta, a),
        }
    }
}

/// ZOH discretization of a scalar system: returns `(A_bar, B_bar)`.
pub fn discretize(delta: f32, a: f32, b: f32) -> Result<(f32, f32)> {
    if delta <= 0.0 || !delta.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "discretize: delta must be positive and finite, got {delta}"
        )));
    }
    if a > 0.0 || !a.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "discretize: a must be non-positive (stable), got {a}"
        )));
    }
    let (a_bar, s) = BbarRule::Zoh.coefficients(delta, a);
    Ok((a_bar, s * b))
}

/// An affine map `h -> a * h + b`, the element type of the scan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Affine {
    pub a: f32,
    pub b: f32,
}

impl Affine {
    pub const IDENTITY: Affine = Affine { a: 1.0, b: 0.0 };

    /// `next ∘ self`: apply `self` first, then `next`.
    #[inline(always)]
    pub fn then(self, next: Affine) -> Affine {
        Affine {
            a: flush_subnormal(next.a * self.a),
            b: flush_subnormal(next.a * self.b + next.b),
        }
    }

    #[inline(always)]
    pub fn apply(self, h: f32) -> f32 {
        flush_subnormal(self.a * h + self.b)
    }
}

/// Continuous diagonal state matrix and skip term of one scan unit.
#[derive(Clone, Debug)]
pub struct SsmParams {
    /// `(channels, state)`; `A = -exp(a_log)`.
    pub a_log: Tensor,
    /// `(channels,)`
    pub d_skip: Tensor,
    pub rule: BbarRule,
}

impl SsmParams {
    pub fn new(a_log: Tensor, d_skip: Tensor, rule: BbarRule) -> Result<Self> {
        let [ch, _n] = a_log.shape() else {
            return Err(Error::shape(format!(
                "a_log must be (channels, state), got {:?}",
                a_log.shape()
            )));
        };
        if d_skip.shape() != [*ch] {
            return Err(Error::shape(format!(
                "d_skip must be [{ch}], got {:?}",
                d_skip.shape()
            )));
        }
        Ok(SsmParams {
            a_log,
            d_skip,
            rule,
        })
    }

    pub fn channels(&self) -> usize {
        self.a_log.shape()[0]
    }

    pub fn state(&self) -> usize {
        self.a_log.shape()[1]
    }

    /// `A = -exp(a_log)` for channel `d`.
    pub fn a_row(&self, d: usize) -> Vec<f32> {
        let n = self.state();
        self.a_log.data()[d * n..(d + 1) * n]
            .iter()
            .map(|&v| -v.exp())
            .collect()
    }
}

/// Borrowed scan operands. `u`/`delta` are `(batch, channels, len)`,
/// `b`/`c` are `(batch, state, len)`; `len` may be zero.
#[derive(Clone, Copy, Debug)]
pub struct ScanInput<'a> {
    pub batch: usize,
    pub channels: usize,
    pub state: usize,
    pub len: usize,
    pub u: &'a [f32],
    pub delta: &'a [f32],
    pub b: &'a [f32],
    pub c: &'a [f32],
}

impl<'a> ScanInput<'a> {
    pub fn new(
        (batch, channels, state, len): (usize, usize, usize, usize),
        u: &'a [f32],
        delta: &'a [f32],
        b: &'a [f32],
        c: &'a [f32],
    ) -> Result<Self> {
        if state == 0 {
            return Err(Error::InvalidArgument("state size must be >= 1".into()));
        }
        let seq = batch * channels * len;
        let proj = batch * state * len;
        if u.len() != seq || delta.len() != seq || b.len() != proj || c.len() != proj {
            return Err(Error::shape(format!(
                "scan operands: u {} delta {} (want {seq}), b {} c {} (want {proj})",
                u.len(),
                delta.len(),
                b.len(),
                c.len()
            )));
        }
        if let Some(bad) = delta.iter().find(|&&d| d.is_nan() || d <= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "scan delta must be > 0, found {bad}"
            )));
        }
        Ok(ScanInput {
            batch,
            channels,
            state,
            len,
            u,
            delta,
            b,
            c,
        })
    }

    fn check(&self, params: &SsmParams) -> Result<()> {
        if params.channels() != self.channels || params.state() != self.state {
            return Err(Error::shape(format!(
                "scan params are ({}, {}), input is ({}, {})",
                params.channels(),
                params.state(),
                self.channels,
                self.state
            )));
        }
        Ok(())
    }
}

/// Plain per-step recurrence; the correctness oracle for the other scans.
pub fn selective_scan_ref(input: &ScanInput, params: &SsmParams) -> Result<Vec<f32>> {
    match params.rule {
        BbarRule::Zoh => selective_scan_ref_with(input, params, &Zoh),
        BbarRule::Euler => selective_scan_ref_with(input, params, &Euler),
    }
    .map(|(y, _)| y)
}

/// Reference scan with an explicit discretizer; also returns the number of
/// recurrence steps taken (one per `(batch, channel, t)`).
pub fn selective_scan_ref_with(
    input: &ScanInput,
    params: &SsmParams,
    disc: &(impl Discretizer + ?Sized),
) -> Result<(Vec<f32>, u64)> {
    input.check(params)?;
    let ScanInput {
        batch,
        channels,
        state,
        len,
        ..
    } = *input;
    let mut y = vec![0.0f32; batch * channels * len];
    let mut h = vec![0.0f32; state];
    let mut steps = 0u64;
    for bi in 0..batch {
        for d in 0..channels {
            let a = params.a_row(d);
            let skip = params.d_skip.data()[d];
            h.fill(0.0);
            let row = (bi * channels + d) * len;
            for t in 0..len {
                let x = input.u[row + t];
                let delta = input.delta[row + t];
                let mut acc = 0.0f32;
                for n in 0..state {
                    let (a_bar, s) = disc.coefficients(delta, a[n]);
                    let bn = input.b[(bi * state + n) * len + t];
                    let cn = input.c[(bi * state + n) * len + t];
                    h[n] = flush_subnormal(a_bar * h[n] + flush_subnormal((s * bn) * x));
                    acc += cn * h[n];
                }
                y[row + t] = acc + skip * x;
                steps += 1;
            }
        }
    }
    Ok((y, steps))
}

/// Blocked scan with the default chunk length.
pub fn selective_scan_fast(input: &ScanInput, params: &SsmParams) -> Result<Vec<f32>> {
    match params.rule {
        BbarRule::Zoh => selective_scan_fast_with(input, params, &Zoh, DEFAULT_CHUNK),
        BbarRule::Euler => selective_scan_fast_with(input, params, &Euler, DEFAULT_CHUNK),
    }
}

/// Blocked scan: per chunk of `chunk` steps the coefficients are discretized
/// into contiguous `(step, state)` buffers, then the affine recurrence is
/// folded left to right across the chunk.
///
/// The fold order is the same for every chunk length, so the output is
/// bit-identical to [`selective_scan_ref`] and to any other chunking.
/// Channels are split into one group per worker; a group shares each chunk's
/// `B`/`C` slice, which is transposed once into cache-resident buffers.
pub fn selective_scan_fast_with(
    input: &ScanInput,
    params: &SsmParams,
    disc: &(impl Discretizer + ?Sized),
    chunk: usize,
) -> Result<Vec<f32>> {
    input.check(params)?;
    let chunk = chunk.max(1);
    let ScanInput { channels, len, .. } = *input;
    let mut y = vec![0.0f32; input.batch * channels * len];
    if len == 0 {
        return Ok(y);
    }
    let group = channels.div_ceil(rayon::current_num_threads()).max(1);
    y.par_chunks_mut(channels * len)
        .enumerate()
        .for_each(|(bi, batch_out)| {
            batch_out
                .par_chunks_mut(group * len)
                .enumerate()
                .for_each(|(g, out)| {
                    scan_group(input, params, disc, chunk, bi, g * group, out);
                });
        });
    Ok(y)
}

/// Channels `d0..d0 + out.len() / len` of batch item `bi`.
fn scan_group(
    input: &ScanInput,
    params: &SsmParams,
    disc: &(impl Discretizer + ?Sized),
    chunk: usize,
    bi: usize,
    d0: usize,
    out: &mut [f32],
) {
    let ScanInput {
        channels,
        state,
        len,
        ..
    } = *input;
    let rows = out.len() / len;
    let a: Vec<Vec<f32>> = (d0..d0 + rows).map(|d| params.a_row(d)).collect();
    let proj = &input.b[bi * state * len..(bi + 1) * state * len];
    let read = &input.c[bi * state * len..(bi + 1) * state * len];
    let mut h = vec![0.0f32; rows * state];
    let mut bt = vec![0.0f32; chunk * state];
    let mut ct = vec![0.0f32; chunk * state];
    let mut a_buf = vec![0.0f32; chunk * state];
    let mut b_buf = vec![0.0f32; chunk * state];
    let mut t0 = 0;
    while t0 < len {
        let t1 = (t0 + chunk).min(len);
        let steps = t1 - t0;
        for n in 0..state {
            let (bs, cs) = (&proj[n * len + t0..], &read[n * len + t0..]);
            for j in 0..steps {
                bt[j * state + n] = bs[j];
                ct[j * state + n] = cs[j];
            }
        }
        for (r, out) in out.chunks_mut(len).enumerate() {
            let row = (bi * channels + d0 + r) * len;
            let skip = params.d_skip.data()[d0 + r];
            let h = &mut h[r * state..(r + 1) * state];
            for j in 0..steps {
                let x = input.u[row + t0 + j];
                let delta = input.delta[row + t0 + j];
                let span = j * state..(j + 1) * state;
                let a_dst = &mut a_buf[span.clone()];
                let b_dst = &mut b_buf[span.clone()];
                for (((ad, bd), &an), &bn) in a_dst.iter_mut().zip(b_dst).zip(&a[r]).zip(&bt[span])
                {
                    let (a_bar, s) = disc.coefficients(delta, an);
                    *ad = a_bar;
                    *bd = flush_subnormal((s * bn) * x);
                }
            }
            // states overwrite the input terms in place
            for j in 0..steps {
                let a_row = &a_buf[j * state..(j + 1) * state];
                let b_row = &mut b_buf[j * state..(j + 1) * state];
                for ((hn, &an), bn) in h.iter_mut().zip(a_row).zip(b_row) {
                    *hn = flush_subnormal(an * *hn + *bn);
                    *bn = *hn;
                }
            }
            for j in 0..steps {
                let hs = &b_buf[j * state..(j + 1) * state];
                let cs = &ct[j * state..(j + 1) * state];
                let mut acc = 0.0f32;
                for (&cn, &hn) in cs.iter().zip(hs) {
                    acc += cn * hn;
                }
                out[t0 + j] = acc + skip * input.u[row + t0 + j];
            }
        }
        t0 = t1;
    }
}

/// Two-pass chunked scan built on the affine composition
/// `(a2, b2) ∘ (a1, b1) = (a2 a1, a2 b1 + b2)`.
///
/// Pass one scans every chunk independently from the identity map (chunks run
/// in parallel); pass two threads the carried state through the chunk
/// summaries and corrects each step as `h_t = local_b_t + local_a_t * carry`.
/// Reassociation changes rounding, so this agrees with the reference to
/// floating-point tolerance rather than bit-for-bit.
pub fn selective_scan_assoc(
    input: &ScanInput,
    params: &SsmParams,
    chunk: usize,
) -> Result<Vec<f32>> {
    input.check(params)?;
    let chunk = chunk.max(1);
    let ScanInput {
        batch,
        channels,
        state,
        len,
        ..
    } = *input;
    let mut y = vec![0.0f32; batch * channels * len];
    if len == 0 {
        return Ok(y);
    }
    let (bt, ct) = transpose_projections(input);
    let disc = &params.rule;

    for (row_idx, out) in y.chunks_mut(len).enumerate() {
        let bi = row_idx / channels;
        let d = row_idx % channels;
        let a = params.a_row(d);
        let skip = params.d_skip.data()[d];
        let row = row_idx * len;
        let bt = &bt[bi * len * state..(bi + 1) * len * state];

        // local[t][n]: composition of the chunk's maps up to and including t
        let mut local = vec![Affine::IDENTITY; len * state];
        local
            .par_chunks_mut(chunk * state)
            .enumerate()
            .for_each(|(ci, buf)| {
                let t0 = ci * chunk;
                let mut acc = vec![Affine::IDENTITY; state];
                for (j, step) in buf.chunks_mut(state).enumerate() {
                    let t = t0 + j;
                    let x = input.u[row + t];
                    let delta = input.delta[row + t];
                    for n in 0..state {
                        let (a_bar, s) = disc.coefficients(delta, a[n]);
                        let map = Affine {
                            a: a_bar,
                            b: flush_subnormal((s * bt[t * state + n]) * x),
                        };
                        acc[n] = acc[n].then(map);
                        step[n] = acc[n];
                    }
                }
            });

        let mut carry = vec![0.0f32; state];
        for (ci, buf) in local.chunks(chunk * state).enumerate() {
            let t0 = ci * chunk;
            for (j, step) in buf.chunks(state).enumerate() {
                let t = t0 + j;
                let cs = &ct[(bi * len + t) * state..(bi * len + t + 1) * state];
                let mut acc = 0.0f32;
                for n in 0..state {
                    acc += cs[n] * step[n].apply(carry[n]);
                }
                out[t] = acc + skip * input.u[row + t];
            }
            let last = buf.chunks(state).last().expect("non-empty chunk");
            for n in 0..state {
                carry[n] = last[n].apply(carry[n]);
            }
        }
    }
    Ok(y)
}

/// `(batch, state, len)` -> `(batch, len, state)` for `b` and `c`.
fn transpose_projections(input: &ScanInput) -> (Vec<f32>, Vec<f32>) {
    let ScanInput {
        batch, state, len, ..
    } = *input;
    let tr = |src: &[f32]| {
        let mut dst = vec![0.0f32; src.len()];
        for bi in 0..batch {
            for n in 0..state {
                let s = &src[(bi * state + n) * len..(bi * state + n + 1) * len];
                for (t, &v) in s.iter().enumerate() {
                    dst[(bi * len + t) * state + n] = v;
                }
            }
        }
        dst
    };
    (tr(input.b), tr(input.c))
}

/// Which scan implementation a layer runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ScanKernel {
    Reference,
    #[default]
    Fast,
    Associative,
}

/// Weights of one selective scan unit over `channels` inner channels.
///
/// Per step: `[dt_in; B; C] = x_proj(x)`, `delta = softplus(dt_proj(dt_in) + dt_bias)`.
#[derive(Clone, Debug)]
pub struct S6Weights {
    pub x_proj: Conv2d,
    pub dt_proj: Conv2d,
    pub ssm: SsmParams,
    pub dt_rank: usize,
}

impl S6Weights {
    pub fn build(
        p: &mut Params,
        name: &str,
        channels: usize,
        state: usize,
        dt_rank: usize,
        rule: BbarRule,
    ) -> Result<Self> {
        if state == 0 || dt_rank == 0 {
            return Err(Error::Config("state size and dt rank must be >= 1".into()));
        }
        let mut s = p.scope(name);
        let x_proj = Conv2d::build(
            &mut s,
            "x_proj",
            ConvSpec::pointwise(channels, dt_rank + 2 * state).without_bias(),
        )?;
        let dt_spec = ConvSpec::pointwise(dt_rank, channels).without_bias();
        let dt_weight = s.get(
            "dt_proj.weight",
            &dt_spec.weight_shape(),
            Init::KaimingUniform {
                fan_in: dt_spec.fan_in(),
            },
        )?;
        let dt_bias = s.get(
            "dt_proj.bias",
            &[channels],
            Init::DtBias {
                min: 1e-3,
                max: 1e-1,
            },
        )?;
        let a_log = s.get("a_log", &[channels, state], Init::SsmALog)?;
        let d_skip = s.get("d_skip", &[channels], Init::Ones)?;
        Ok(S6Weights {
            x_proj,
            dt_proj: Conv2d {
                spec: ConvSpec {
                    bias: true,
                    ..dt_spec
                },
                weight: dt_weight,
                bias: Some(dt_bias),
            },
            ssm: SsmParams::new(a_log, d_skip, rule)?,
            dt_rank,
        })
    }

    pub fn channels(&self) -> usize {
        self.ssm.channels()
    }

    pub fn state(&self) -> usize {
        self.ssm.state()
    }

    /// Learnable parameter count.
    pub fn param_count(channels: usize, state: usize, dt_rank: usize) -> usize {
        channels * (dt_rank + 2 * state)
            + dt_rank * channels
            + channels
            + channels * state
            + channels
    }

    /// Multiply-accumulates over `len` steps: projections plus `len * state`
    /// recurrence updates per inner channel.
    pub fn macs(channels: usize, state: usize, dt_rank: usize, len: usize) -> u64 {
        let proj = channels * (dt_rank + 2 * state) + dt_rank * channels;
        ((proj + channels * state) * len) as u64
    }
}

/// Selective scan layer over a `(batch, channels, len)` sequence.
pub fn s6_layer(x: &Tensor, w: &S6Weights) -> Result<Tensor> {
    s6_layer_with(x, w, ScanKernel::Fast).map(|(y, _)| y)
}

/// [`s6_layer`] with a chosen kernel; returns the reference step count when
/// `kernel` is [`ScanKernel::Reference`] (zero otherwise).
pub fn s6_layer_with(x: &Tensor, w: &S6Weights, kernel: ScanKernel) -> Result<(Tensor, u64)> {
    let (batch, channels, len) = x.dims3()?;
    if channels != w.channels() {
        return Err(Error::shape(format!(
            "s6_layer: input has {channels} channels, weights expect {}",
            w.channels()
        )));
    }
    let state = w.state();
    let r = w.dt_rank;
    let x4 = x.clone().reshape(&[batch, channels, 1, len])?;
    let proj = w.x_proj.forward(&x4)?;
    let dt_in = proj.narrow_channels(0, r)?;
    let b = proj.narrow_channels(r, state)?;
    let c = proj.narrow_channels(r + state, state)?;
    let mut delta = w.dt_proj.forward(&dt_in)?;
    delta.map_inplace(softplus);
    // softplus underflows to 0 for very negative inputs
    delta.map_inplace(|v| v.max(f32::MIN_POSITIVE));
    let input = ScanInput::new(
        (batch, channels, state, len),
        x.data(),
        delta.data(),
        b.data(),
        c.data(),
    )?;
    let (y, steps) = match kernel {
        ScanKernel::Reference => selective_scan_ref_with(&input, &w.ssm, &w.ssm.rule)?,
        ScanKernel::Fast => (selective_scan_fast(&input, &w.ssm)?, 0),
        ScanKernel::Associative => (selective_scan_assoc(&input, &w.ssm, DEFAULT_CHUNK)?, 0),
    };
    Ok((Tensor::new(&[batch, channels, len], y)?, steps))
}

/// Reverse every sequence of a `(batch, channels, len)` tensor along `len`.
pub fn reverse_sequence(x: &Tensor) -> Result<Tensor> {
    let (_, _, len) = x.dims3()?;
    let mut out = x.clone();
    out.data_mut().chunks_mut(len).for_each(|row| row.reverse());
    Ok(out)
}

/// Channel forward selective scan: channel index `0 -> C-1` is the scan axis.
///
/// Input is `(tokens, 1, C)`: every pooled coordinate is an independent batch
/// element carrying a scalar per channel.
pub fn cfssm(seq: &Tensor, w: &S6Weights) -> Result<Tensor> {
    check_channel_sequence(seq, w)?;
    s6_layer(seq, w)
}

/// Channel backward selective scan: `reverse ∘ scan ∘ reverse`.
pub fn cbssm(seq: &Tensor, w: &S6Weights) -> Result<Tensor> {
    check_channel_sequence(seq, w)?;
    reverse_sequence(&s6_layer(&reverse_sequence(seq)?, w)?)
}

fn check_channel_sequence(seq: &Tensor, w: &S6Weights) -> Result<()> {
    let (_, width, _) = seq.dims3()?;
    if width != 1 || w.channels() != 1 {
        return Err(Error::shape(format!(
            "channel scan expects scalar tokens (tokens, 1, C); got width {width}, weights {}",
            w.channels()
        )));
    }
    Ok(())
}
