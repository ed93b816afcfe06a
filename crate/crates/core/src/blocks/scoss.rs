//! Spatial-channel block: `Z = CCOSS(SOSS(x)) + x`, `out = MSFFN(Z) + Z`.
//!
//! A disabled SOSS or CCOSS stage is the identity; a disabled MSFFN
//! contributes nothing, leaving `out = Z`.

use super::ccoss::{ccoss_forward, CcossWeights};
use super::msffn::{msffn_forward, MsffnWeights};
use super::soss::{soss_forward_with, SossWeights};
use super::BlockConfig;
use crate::census::FlopScope;
use crate::error::Result;
use crate::nn::Params;
use crate::ssm::ScanKernel;
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct ScossWeights {
    pub channels: usize,
    pub soss: Option<SossWeights>,
    pub ccoss: Option<CcossWeights>,
    pub msffn: Option<MsffnWeights>,
}

impl ScossWeights {
    pub fn build(p: &mut Params, name: &str, channels: usize, cfg: &BlockConfig) -> Result<Self> {
        let mut s = p.scope(name);
        let soss = cfg
            .use_soss
            .then(|| SossWeights::build(&mut s, "soss", channels, cfg))
            .transpose()?;
        let ccoss = cfg
            .use_ccoss
            .then(|| CcossWeights::build(&mut s, "ccoss", channels, cfg))
            .transpose()?;
        let msffn = cfg
            .use_msffn
            .then(|| MsffnWeights::build(&mut s, "msffn", channels, cfg))
            .transpose()?;
        Ok(ScossWeights {
            channels,
            soss,
            ccoss,
            msffn,
        })
    }

    pub fn param_count(channels: usize, cfg: &BlockConfig) -> usize {
        let mut n = 0;
        if cfg.use_soss {
            n += SossWeights::param_count(channels, cfg);
        }
        if cfg.use_ccoss {
            n += CcossWeights::param_count(channels, cfg);
        }
        if cfg.use_msffn {
            n += MsffnWeights::param_count(channels, cfg);
        }
        n
    }

    pub fn count_macs(f: &mut FlopScope, channels: usize, cfg: &BlockConfig, h: usize, w: usize) {
        if cfg.use_soss {
            SossWeights::count_macs(&mut f.scope("soss"), channels, cfg, h, w);
        }
        if cfg.use_ccoss {
            CcossWeights::count_macs(&mut f.scope("ccoss"), channels, cfg, h, w);
        }
        if cfg.use_msffn {
            MsffnWeights::count_macs(&mut f.scope("msffn"), channels, cfg, h, w);
        }
    }
}

pub fn scoss_forward(x: &Tensor, w: &ScossWeights) -> Result<Tensor> {
    scoss_forward_with(x, w, ScanKernel::Fast)
}

pub fn scoss_forward_with(x: &Tensor, w: &ScossWeights, kernel: ScanKernel) -> Result<Tensor> {
    let spatial = match &w.soss {
        Some(s) => soss_forward_with(x, s, kernel)?,
        None => x.clone(),
    };
    let mut z = match &w.ccoss {
        Some(c) => ccoss_forward(&spatial, c)?,
        None => spatial,
    };
    z.add_assign(x)?;
    if let Some(m) = &w.msffn {
        let ffn = msffn_forward(&z, m)?;
        z.add_assign(&ffn)?;
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::{Initializer, Recorder};
    use crate::rng::Rng;

    fn build(c: usize, seed: u64, cfg: &BlockConfig) -> ScossWeights {
        let mut init = Initializer::new(seed);
        ScossWeights::build(&mut Params::new(&mut init), "blk", c, cfg).unwrap()
    }

    fn random(shape: &[usize], seed: u64) -> Tensor {
        let mut rng = Rng::new(seed);
        Tensor::from_fn(shape, |_| rng.normal())
    }

    fn zero(c: &mut crate::nn::Conv2d) {
        c.weight.map_inplace(|_| 0.0);
        if let Some(b) = c.bias.as_mut() {
            b.map_inplace(|_| 0.0);
        }
    }

    #[test]
    fn shape_preserved() {
        let w = build(16, 1, &BlockConfig::default());
        let x = random(&[1, 16, 32, 32], 2);
        assert_eq!(scoss_forward(&x, &w).unwrap().shape(), &[1, 16, 32, 32]);
    }

    #[test]
    fn zeroed_soss_and_msffn_leave_ccoss_plus_residual() {
        let mut w = build(4, 3, &BlockConfig::default());
        zero(&mut w.soss.as_mut().unwrap().out_proj);
        for b in &mut w.msffn.as_mut().unwrap().branches {
            for c in [&mut b.conv_a, &mut b.dw_a, &mut b.conv_b, &mut b.dw_b] {
                zero(c);
            }
        }
        let x = random(&[1, 4, 6, 5], 4);
        let want = ccoss_forward(&x, w.ccoss.as_ref().unwrap())
            .unwrap()
            .add(&x)
            .unwrap();
        assert_eq!(scoss_forward(&x, &w).unwrap(), want);
    }

    #[test]
    fn ablations_compose_sub_blocks() {
        let x = random(&[1, 4, 6, 6], 5);
        let full = BlockConfig::default();
        let cases = [
            BlockConfig {
                use_soss: false,
                ..full
            },
            BlockConfig {
                use_ccoss: false,
                ..full
            },
            BlockConfig {
                use_msffn: false,
                ..full
            },
        ];
        for cfg in cases {
            let w = build(4, 6, &cfg);
            let s = w.soss.as_ref().map_or(x.clone(), |s| {
                soss_forward_with(&x, s, ScanKernel::Fast).unwrap()
            });
            let mut z = w
                .ccoss
                .as_ref()
                .map_or(s.clone(), |c| ccoss_forward(&s, c).unwrap());
            z.add_assign(&x).unwrap();
            if let Some(m) = &w.msffn {
                z = z.add(&msffn_forward(&z, m).unwrap()).unwrap();
            }
            assert_eq!(scoss_forward(&x, &w).unwrap(), z);
        }
    }

    #[test]
    fn census_matches_schema_for_all_variants() {
        for bits in 0..8u8 {
            let cfg = BlockConfig {
                use_soss: bits & 1 != 0,
                use_ccoss: bits & 2 != 0,
                use_msffn: bits & 4 != 0,
                ..Default::default()
            };
            let mut rec = Recorder::default();
            ScossWeights::build(&mut Params::new(&mut rec), "b", 12, &cfg).unwrap();
            let learnable: usize = rec
                .params
                .iter()
                .filter(|i| !i.init.is_buffer())
                .map(|i| i.numel())
                .sum();
            assert_eq!(learnable, ScossWeights::param_count(12, &cfg));
        }
    }

    #[test]
    fn deterministic() {
        let w = build(8, 7, &BlockConfig::default());
        let x = random(&[2, 8, 8, 8], 8);
        assert_eq!(
            scoss_forward(&x, &w).unwrap(),
            scoss_forward(&x, &w).unwrap()
        );
    }
}
