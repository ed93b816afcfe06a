//! Multi-scale feed-forward network.
//!
//! From a shared `n = LN(z)`, branch `k` in `{1, 3, 5}` computes
//! `Zk = dw_k(conv_k(ReLU(dw_k(conv_k(n)))))` with two independent
//! conv/depth-wise pairs of kernel size `k`. The branches are summed, or
//! concatenated and projected back to `C` channels.

use super::{BlockConfig, MsffnFuse};
use crate::census::FlopScope;
use crate::error::{Error, Result};
use crate::nn::{relu, Conv2d, ConvSpec, LayerNorm, Params};
use crate::tensor::Tensor;

pub const BRANCH_KERNELS: [usize; 3] = [1, 3, 5];

#[derive(Clone, Debug)]
pub struct MsffnBranch {
    pub conv_a: Conv2d,
    pub dw_a: Conv2d,
    pub conv_b: Conv2d,
    pub dw_b: Conv2d,
}

impl MsffnBranch {
    fn build(p: &mut Params, name: &str, channels: usize, k: usize) -> Result<Self> {
        let mut s = p.scope(name);
        Ok(MsffnBranch {
            conv_a: Conv2d::build(&mut s, "conv_a", ConvSpec::same(channels, channels, k))?,
            dw_a: Conv2d::build(&mut s, "dw_a", ConvSpec::depthwise(channels, k))?,
            conv_b: Conv2d::build(&mut s, "conv_b", ConvSpec::same(channels, channels, k))?,
            dw_b: Conv2d::build(&mut s, "dw_b", ConvSpec::depthwise(channels, k))?,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut t = self.dw_a.forward(&self.conv_a.forward(x)?)?;
        t.map_inplace(relu);
        self.dw_b.forward(&self.conv_b.forward(&t)?)
    }

    fn param_count(channels: usize, k: usize) -> usize {
        2 * (ConvSpec::same(channels, channels, k).param_count()
            + ConvSpec::depthwise(channels, k).param_count())
    }
}

#[derive(Clone, Debug)]
pub struct MsffnWeights {
    pub norm: LayerNorm,
    pub branches: Vec<MsffnBranch>,
    pub proj: Option<Conv2d>,
}

impl MsffnWeights {
    pub fn build(p: &mut Params, name: &str, channels: usize, cfg: &BlockConfig) -> Result<Self> {
        let mut s = p.scope(name);
        let norm = LayerNorm::build(&mut s, "norm", channels)?;
        let branches = BRANCH_KERNELS
            .iter()
            .map(|&k| MsffnBranch::build(&mut s, &format!("branch{k}"), channels, k))
            .collect::<Result<Vec<_>>>()?;
        let proj = match cfg.msffn_fuse {
            MsffnFuse::Sum => None,
            MsffnFuse::ConcatProj => Some(Conv2d::build(
                &mut s,
                "proj",
                ConvSpec::pointwise(3 * channels, channels),
            )?),
        };
        Ok(MsffnWeights {
            norm,
            branches,
            proj,
        })
    }

    pub fn channels(&self) -> usize {
        self.norm.gamma.numel()
    }

    pub fn param_count(channels: usize, cfg: &BlockConfig) -> usize {
        let branches: usize = BRANCH_KERNELS
            .iter()
            .map(|&k| MsffnBranch::param_count(channels, k))
            .sum();
        let proj = match cfg.msffn_fuse {
            MsffnFuse::Sum => 0,
            MsffnFuse::ConcatProj => ConvSpec::pointwise(3 * channels, channels).param_count(),
        };
        2 * channels + branches + proj
    }

    pub fn count_macs(f: &mut FlopScope, channels: usize, cfg: &BlockConfig, h: usize, w: usize) {
        f.add("norm", (channels * h * w) as u64);
        for k in BRANCH_KERNELS {
            let dense = ConvSpec::same(channels, channels, k).macs(h, w);
            let dw = ConvSpec::depthwise(channels, k).macs(h, w);
            f.add(&format!("branch{k}"), 2 * (dense + dw));
        }
        if cfg.msffn_fuse == MsffnFuse::ConcatProj {
            f.add(
                "proj",
                ConvSpec::pointwise(3 * channels, channels).macs(h, w),
            );
        }
    }
}

/// Branch outputs combined; the caller adds the residual.
pub fn msffn_forward(z: &Tensor, w: &MsffnWeights) -> Result<Tensor> {
    let (_, c, _, _) = z.dims4()?;
    if c != w.channels() {
        return Err(Error::shape(format!(
            "msffn: input has {c} channels, weights expect {}",
            w.channels()
        )));
    }
    let normed = w.norm.forward(z)?;
    let outs = w
        .branches
        .iter()
        .map(|b| b.forward(&normed))
        .collect::<Result<Vec<_>>>()?;
    match &w.proj {
        None => {
            let mut acc = outs[0].clone();
            for o in &outs[1..] {
                acc.add_assign(o)?;
            }
            Ok(acc)
        }
        Some(proj) => {
            let refs: Vec<&Tensor> = outs.iter().collect();
            proj.forward(&Tensor::concat_channels(&refs)?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::{Initializer, Recorder};
    use crate::rng::Rng;

    fn weights(c: usize, seed: u64, fuse: MsffnFuse) -> MsffnWeights {
        let cfg = BlockConfig {
            msffn_fuse: fuse,
            ..Default::default()
        };
        let mut init = Initializer::new(seed);
        MsffnWeights::build(&mut Params::new(&mut init), "ffn", c, &cfg).unwrap()
    }

    fn random(shape: &[usize], seed: u64) -> Tensor {
        let mut rng = Rng::new(seed);
        Tensor::from_fn(shape, |_| rng.normal())
    }

    fn zero_conv(c: &mut Conv2d) {
        c.weight.map_inplace(|_| 0.0);
        if let Some(b) = c.bias.as_mut() {
            b.map_inplace(|_| 0.0);
        }
    }

    fn zero_branch(b: &mut MsffnBranch) {
        for c in [&mut b.conv_a, &mut b.dw_a, &mut b.conv_b, &mut b.dw_b] {
            zero_conv(c);
        }
    }

    #[test]
    fn shape_preserved() {
        for fuse in [MsffnFuse::Sum, MsffnFuse::ConcatProj] {
            let w = weights(6, 1, fuse);
            let z = random(&[2, 6, 8, 8], 2);
            assert_eq!(msffn_forward(&z, &w).unwrap().shape(), &[2, 6, 8, 8]);
        }
    }

    #[test]
    fn zero_branches_give_zero() {
        let mut w = weights(4, 3, MsffnFuse::Sum);
        w.branches.iter_mut().for_each(zero_branch);
        let out = msffn_forward(&random(&[1, 4, 5, 5], 4), &w).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn disabling_larger_branches_leaves_pointwise_branch() {
        let mut w = weights(5, 5, MsffnFuse::Sum);
        zero_branch(&mut w.branches[1]);
        zero_branch(&mut w.branches[2]);
        let z = random(&[1, 5, 6, 7], 6);
        let want = w.branches[0].forward(&w.norm.forward(&z).unwrap()).unwrap();
        assert_eq!(msffn_forward(&z, &w).unwrap(), want);
    }

    #[test]
    fn single_pixel_uses_center_taps() {
        let w = weights(2, 7, MsffnFuse::Sum);
        let z = Tensor::new(&[1, 2, 1, 1], vec![0.3, -1.1]).unwrap();
        let n = w.norm.forward(&z).unwrap();
        let mut want = [0.0f64; 2];
        for (bi, b) in w.branches.iter().enumerate() {
            let k = BRANCH_KERNELS[bi];
            let center = k / 2 * k + k / 2;
            let dense = |c: &Conv2d, x: &[f64]| -> Vec<f64> {
                (0..2)
                    .map(|o| {
                        let bias = c.bias.as_ref().unwrap().data()[o] as f64;
                        bias + (0..2)
                            .map(|i| c.weight.data()[(o * 2 + i) * k * k + center] as f64 * x[i])
                            .sum::<f64>()
                    })
                    .collect()
            };
            let dw = |c: &Conv2d, x: &[f64]| -> Vec<f64> {
                (0..2)
                    .map(|o| {
                        c.bias.as_ref().unwrap().data()[o] as f64
                            + c.weight.data()[o * k * k + center] as f64 * x[o]
                    })
                    .collect()
            };
            let x: Vec<f64> = n.data().iter().map(|&v| v as f64).collect();
            let t: Vec<f64> = dw(&b.dw_a, &dense(&b.conv_a, &x))
                .into_iter()
                .map(|v| v.max(0.0))
                .collect();
            let y = dw(&b.dw_b, &dense(&b.conv_b, &t));
            want[0] += y[0];
            want[1] += y[1];
        }
        let got = msffn_forward(&z, &w).unwrap();
        for (g, w) in got.data().iter().zip(want) {
            assert!((*g as f64 - w).abs() < 1e-5);
        }
    }

    #[test]
    fn param_count_closed_form() {
        for fuse in [MsffnFuse::Sum, MsffnFuse::ConcatProj] {
            let cfg = BlockConfig {
                msffn_fuse: fuse,
                ..Default::default()
            };
            let mut rec = Recorder::default();
            MsffnWeights::build(&mut Params::new(&mut rec), "f", 10, &cfg).unwrap();
            let declared: usize = rec.params.iter().map(|i| i.numel()).sum();
            assert_eq!(declared, MsffnWeights::param_count(10, &cfg));
            let branches: usize = [1usize, 9, 25]
                .iter()
                .map(|kk| 2 * (100 * kk + 10 + 10 * kk + 10))
                .sum();
            let proj = if fuse == MsffnFuse::Sum { 0 } else { 300 + 10 };
            assert_eq!(declared, 20 + branches + proj);
        }
    }
}
