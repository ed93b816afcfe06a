//! Channel coordinate omnidirectional selective scan.
//!
//! ```text
//! yh = mean over H (N,C,1,W)      yw = mean over W (N,C,H,1)
//! [yh1, yw1] = split(ReLU(BN(conv1x1(concat(yh, yw)))))
//! yh2 = sigmoid(CF(yh1) * SiLU(yh1) + CB(yh1) * SiLU(yh1))      (same for yw)
//! out = yh2 * yw2 * y * softmax_c(dwconv1x1(y)) + y
//! ```
//!
//! `CF`/`CB` scan each pooled coordinate's channel vector forward and
//! backward. The `(N,C,1,W)` and `(N,C,H,1)` factors broadcast over `(N,C,H,W)`.

use super::{dt_rank, BlockConfig};
use crate::census::FlopScope;
use crate::error::{Error, Result};
use crate::layout::{coordinate_concat, coordinate_split};
use crate::nn::{
    pool_axis, relu, sigmoid, silu, softmax, BatchNorm, Conv2d, ConvSpec, Params, PoolAxis,
};
use crate::ssm::{cbssm, cfssm, S6Weights};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct CcossWeights {
    pub fuse: Conv2d,
    pub bn: BatchNorm,
    pub h_fwd: S6Weights,
    pub h_bwd: S6Weights,
    pub w_fwd: S6Weights,
    pub w_bwd: S6Weights,
    pub modulate: Conv2d,
}

impl CcossWeights {
    pub fn build(p: &mut Params, name: &str, channels: usize, cfg: &BlockConfig) -> Result<Self> {
        let mut s = p.scope(name);
        let fuse = Conv2d::build(&mut s, "fuse", ConvSpec::pointwise(channels, channels))?;
        let bn = BatchNorm::build(&mut s, "bn", channels)?;
        let mut scan = |n: &str| S6Weights::build(&mut s, n, 1, cfg.state, dt_rank(1), cfg.rule);
        let (h_fwd, h_bwd) = (scan("h_fwd")?, scan("h_bwd")?);
        let (w_fwd, w_bwd) = (scan("w_fwd")?, scan("w_bwd")?);
        let modulate = Conv2d::build(&mut s, "modulate", ConvSpec::depthwise(channels, 1))?;
        Ok(CcossWeights {
            fuse,
            bn,
            h_fwd,
            h_bwd,
            w_fwd,
            w_bwd,
            modulate,
        })
    }

    pub fn channels(&self) -> usize {
        self.fuse.spec.in_channels
    }

    pub fn param_count(channels: usize, cfg: &BlockConfig) -> usize {
        ConvSpec::pointwise(channels, channels).param_count()
            + 2 * channels
            + 4 * S6Weights::param_count(1, cfg.state, dt_rank(1))
            + ConvSpec::depthwise(channels, 1).param_count()
    }

    pub fn count_macs(f: &mut FlopScope, channels: usize, cfg: &BlockConfig, h: usize, w: usize) {
        let coords = h + w;
        f.add(
            "fuse",
            ConvSpec::pointwise(channels, channels).macs(1, coords),
        );
        f.add("bn", (channels * coords) as u64);
        // each pooled coordinate is one length-C scan over a single inner channel
        let per_axis = |n: usize| n as u64 * S6Weights::macs(1, cfg.state, dt_rank(1), channels);
        f.add("h_fwd", per_axis(w));
        f.add("h_bwd", per_axis(w));
        f.add("w_fwd", per_axis(h));
        f.add("w_bwd", per_axis(h));
        f.add("modulate", ConvSpec::depthwise(channels, 1).macs(h, w));
    }
}

/// `(N, C, S)`-ordered data to `(N*S, 1, C)` channel sequences.
fn to_channel_tokens(data: &[f32], n: usize, c: usize, s: usize) -> Result<Tensor> {
    let mut out = vec![0.0f32; data.len()];
    for b in 0..n {
        for ch in 0..c {
            for i in 0..s {
                out[(b * s + i) * c + ch] = data[(b * c + ch) * s + i];
            }
        }
    }
    Tensor::new(&[n * s, 1, c], out)
}

fn from_channel_tokens(tokens: &Tensor, n: usize, c: usize, s: usize) -> Vec<f32> {
    let data = tokens.data();
    let mut out = vec![0.0f32; data.len()];
    for b in 0..n {
        for ch in 0..c {
            for i in 0..s {
                out[(b * c + ch) * s + i] = data[(b * s + i) * c + ch];
            }
        }
    }
    out
}

/// `sigmoid(CF(t) * SiLU(t) + CB(t) * SiLU(t))` over a pooled map with `s`
/// coordinates per channel.
fn channel_gate(
    pooled: &Tensor,
    fwd: &S6Weights,
    bwd: &S6Weights,
    n: usize,
    c: usize,
    s: usize,
) -> Result<Vec<f32>> {
    let tokens = to_channel_tokens(pooled.data(), n, c, s)?;
    let gate = tokens.map(silu);
    let f = cfssm(&tokens, fwd)?;
    let b = cbssm(&tokens, bwd)?;
    let mixed = Tensor::from_fn(tokens.shape(), |i| {
        sigmoid(f.data()[i] * gate.data()[i] + b.data()[i] * gate.data()[i])
    });
    Ok(from_channel_tokens(&mixed, n, c, s))
}

pub fn ccoss_forward(y: &Tensor, w: &CcossWeights) -> Result<Tensor> {
    let (n, c, h, wd) = y.dims4()?;
    if c != w.channels() {
        return Err(Error::shape(format!(
            "ccoss: input has {c} channels, weights expect {}",
            w.channels()
        )));
    }
    let yh = pool_axis(y, PoolAxis::Height)?;
    let yw = pool_axis(y, PoolAxis::Width)?;
    let mut joined =
        w.bn.forward(&w.fuse.forward(&coordinate_concat(&yh, &yw)?)?)?;
    joined.map_inplace(relu);
    let (yh1, yw1) = coordinate_split(&joined, wd)?;
    let gate_h = channel_gate(&yh1, &w.h_fwd, &w.h_bwd, n, c, wd)?;
    let gate_w = channel_gate(&yw1, &w.w_fwd, &w.w_bwd, n, c, h)?;
    let mask = softmax(&w.modulate.forward(y)?, 1)?;

    let mut out = y.clone();
    let plane = h * wd;
    for (p, o) in out.data_mut().chunks_mut(plane).enumerate() {
        let gh = &gate_h[p * wd..(p + 1) * wd];
        let gw = &gate_w[p * h..(p + 1) * h];
        let m = &mask.data()[p * plane..(p + 1) * plane];
        for (r, row) in o.chunks_mut(wd).enumerate() {
            for (col, v) in row.iter_mut().enumerate() {
                let yv = *v;
                *v = gh[col] * gw[r] * yv * m[r * wd + col] + yv;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::{Initializer, Recorder};
    use crate::rng::Rng;

    fn weights(c: usize, seed: u64) -> CcossWeights {
        let mut init = Initializer::new(seed);
        let mut p = Params::new(&mut init);
        CcossWeights::build(&mut p, "ccoss", c, &BlockConfig::default()).unwrap()
    }

    fn random(shape: &[usize], seed: u64) -> Tensor {
        let mut rng = Rng::new(seed);
        Tensor::from_fn(shape, |_| rng.normal())
    }

    #[test]
    fn shape_preserved() {
        let w = weights(4, 1);
        let y = random(&[1, 4, 5, 7], 2);
        assert_eq!(ccoss_forward(&y, &w).unwrap().shape(), &[1, 4, 5, 7]);
    }

    #[test]
    fn attention_term_is_a_contraction_with_matching_sign() {
        let w = weights(6, 3);
        let y = random(&[2, 6, 8, 5], 4);
        let out = ccoss_forward(&y, &w).unwrap();
        for (&o, &v) in out.data().iter().zip(y.data()) {
            let delta = o - v;
            assert!(delta.abs() <= v.abs());
            if v != 0.0 {
                assert!(delta == 0.0 || delta.signum() == v.signum());
            }
        }
    }

    #[test]
    fn single_channel_trace() {
        let w = weights(1, 5);
        let y = random(&[1, 1, 3, 4], 6);
        let out = ccoss_forward(&y, &w).unwrap();

        // hand trace: softmax over one channel is 1, scans see length-1 sequences
        let bn = |v: f32| {
            let z = w.fuse.weight.data()[0] * v + w.fuse.bias.as_ref().unwrap().data()[0];
            let inv =
                (1.0 / (w.bn.running_var.data()[0] as f64 + crate::nn::NORM_EPS).sqrt()) as f32;
            relu(
                (z - w.bn.running_mean.data()[0]) * inv * w.bn.gamma.data()[0]
                    + w.bn.beta.data()[0],
            )
        };
        let scalar_scan = |s6: &S6Weights, x: f32| {
            let proj = &s6.x_proj.weight.data(); // [dt, B.., C..]
            let n = s6.state();
            let dt_in = proj[0] * x;
            let delta = crate::nn::softplus(
                s6.dt_proj.weight.data()[0] * dt_in + s6.dt_proj.bias.as_ref().unwrap().data()[0],
            )
            .max(f32::MIN_POSITIVE);
            let mut y = 0.0f32;
            for k in 0..n {
                let a = -s6.ssm.a_log.data()[k].exp();
                let (_, sc) = crate::ssm::Discretizer::coefficients(&s6.ssm.rule, delta, a);
                let h = (sc * (proj[1 + k] * x)) * x;
                y += (proj[1 + n + k] * x) * h;
            }
            y + s6.ssm.d_skip.data()[0] * x
        };
        let gate = |t: f32, f: &S6Weights, b: &S6Weights| {
            let g = silu(t);
            sigmoid(scalar_scan(f, t) * g + scalar_scan(b, t) * g)
        };
        let yv = y.data();
        for r in 0..3 {
            for c in 0..4 {
                let col_mean = (0..3).map(|i| yv[i * 4 + c] as f64).sum::<f64>() / 3.0;
                let row_mean = (0..4).map(|j| yv[r * 4 + j] as f64).sum::<f64>() / 4.0;
                let gh = gate(bn(col_mean as f32), &w.h_fwd, &w.h_bwd);
                let gw = gate(bn(row_mean as f32), &w.w_fwd, &w.w_bwd);
                let v = yv[r * 4 + c];
                let want = gh * gw * v + v;
                let got = out.data()[r * 4 + c];
                assert!((got - want).abs() <= 1e-5, "({r},{c}) {got} vs {want}");
            }
        }
    }

    #[test]
    fn token_layout_round_trip() {
        let data: Vec<f32> = (0..2 * 3 * 5).map(|i| i as f32).collect();
        let t = to_channel_tokens(&data, 2, 3, 5).unwrap();
        assert_eq!(t.shape(), &[10, 1, 3]);
        assert_eq!(&t.data()[..3], &[0.0, 5.0, 10.0]);
        assert_eq!(from_channel_tokens(&t, 2, 3, 5), data);
    }

    #[test]
    fn param_count_closed_form() {
        let cfg = BlockConfig::default();
        let mut rec = Recorder::default();
        CcossWeights::build(&mut Params::new(&mut rec), "c", 8, &cfg).unwrap();
        let learnable: usize = rec
            .params
            .iter()
            .filter(|i| !i.init.is_buffer())
            .map(|i| i.numel())
            .sum();
        assert_eq!(learnable, CcossWeights::param_count(8, &cfg));
        let scan = 33 + 1 + 1 + 16 + 1;
        assert_eq!(learnable, (64 + 8) + 16 + 4 * scan + 16);
    }
}
