//! Spatial omnidirectional selective scan.
//!
//! ```text
//! X1  = LN(merge(scan_d(flatten_d(SiLU(DWConv3x3(in_x(x)))))) for d in 1..4)
//! X2  = SiLU(in_z(x))
//! out = out_proj(X1 * X2) + x
//! ```

use super::{dt_rank, BlockConfig};
use crate::census::FlopScope;
use crate::error::{Error, Result};
use crate::layout::{flatten_directions, merge_directions};
use crate::nn::{silu, Conv2d, ConvSpec, LayerNorm, Params};
use crate::ssm::{s6_layer_with, S6Weights, ScanKernel};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct SossWeights {
    pub in_x: Conv2d,
    pub in_z: Conv2d,
    pub dwconv: Conv2d,
    pub scans: [S6Weights; 4],
    pub norm: LayerNorm,
    pub out_proj: Conv2d,
}

impl SossWeights {
    pub fn build(p: &mut Params, name: &str, channels: usize, cfg: &BlockConfig) -> Result<Self> {
        let inner = cfg.expand * channels;
        let rank = dt_rank(inner);
        let mut s = p.scope(name);
        let in_x = Conv2d::build(&mut s, "in_x", ConvSpec::pointwise(channels, inner))?;
        let in_z = Conv2d::build(&mut s, "in_z", ConvSpec::pointwise(channels, inner))?;
        let dwconv = Conv2d::build(&mut s, "dwconv", ConvSpec::depthwise(inner, 3))?;
        let mut scan = |i: usize| {
            S6Weights::build(
                &mut s,
                &format!("scan{i}"),
                inner,
                cfg.state,
                rank,
                cfg.rule,
            )
        };
        let scans = [scan(0)?, scan(1)?, scan(2)?, scan(3)?];
        let norm = LayerNorm::build(&mut s, "norm", inner)?;
        let out_proj = Conv2d::build(&mut s, "out_proj", ConvSpec::pointwise(inner, channels))?;
        Ok(SossWeights {
            in_x,
            in_z,
            dwconv,
            scans,
            norm,
            out_proj,
        })
    }

    pub fn channels(&self) -> usize {
        self.in_x.spec.in_channels
    }

    pub fn param_count(channels: usize, cfg: &BlockConfig) -> usize {
        let inner = cfg.expand * channels;
        2 * ConvSpec::pointwise(channels, inner).param_count()
            + ConvSpec::depthwise(inner, 3).param_count()
            + 4 * S6Weights::param_count(inner, cfg.state, dt_rank(inner))
            + 2 * inner
            + ConvSpec::pointwise(inner, channels).param_count()
    }

    pub fn count_macs(f: &mut FlopScope, channels: usize, cfg: &BlockConfig, h: usize, w: usize) {
        let inner = cfg.expand * channels;
        let pw = ConvSpec::pointwise(channels, inner);
        f.add("in_x", pw.macs(h, w));
        f.add("in_z", pw.macs(h, w));
        f.add("dwconv", ConvSpec::depthwise(inner, 3).macs(h, w));
        for i in 0..4 {
            f.add(
                &format!("scan{i}"),
                S6Weights::macs(inner, cfg.state, dt_rank(inner), h * w),
            );
        }
        f.add("norm", (inner * h * w) as u64);
        f.add("out_proj", ConvSpec::pointwise(inner, channels).macs(h, w));
    }
}

pub fn soss_forward(x: &Tensor, w: &SossWeights) -> Result<Tensor> {
    soss_forward_with(x, w, ScanKernel::Fast)
}

pub fn soss_forward_with(x: &Tensor, w: &SossWeights, kernel: ScanKernel) -> Result<Tensor> {
    let (_, c, h, wd) = x.dims4()?;
    if c != w.channels() {
        return Err(Error::shape(format!(
            "soss: input has {c} channels, weights expect {}",
            w.channels()
        )));
    }
    let mut inner = w.dwconv.forward(&w.in_x.forward(x)?)?;
    inner.map_inplace(silu);
    let seqs = flatten_directions(&inner)?;
    drop(inner);
    let mut scanned = Vec::with_capacity(4);
    for (seq, sw) in seqs.iter().zip(&w.scans) {
        scanned.push(s6_layer_with(seq, sw, kernel)?.0);
    }
    drop(seqs);
    let scanned: [Tensor; 4] = scanned.try_into().expect("four directions");
    let x1 = w.norm.forward(&merge_directions(&scanned, h, wd)?)?;
    let mut x2 = w.in_z.forward(x)?;
    x2.map_inplace(silu);
    let mut out = w.out_proj.forward(&x1.mul(&x2)?)?;
    out.add_assign(x)?;
    Ok(out)
}
