//! U-shaped enhancement network.
//!
//! ```text
//! F1   = stem(I)                                    w0 @ H
//! enc1 = SCOSS(down1(F1))                           w1 @ H/2
//! enc2 = SCOSS(down2(enc1))                         w2 @ H/4
//! enc3 = SCOSS(down3(enc2))                         w3 @ H/8
//! b    = SCOSS(enc3)                                w3 @ H/8
//! dec3 = SCOSS(fuse3(up3(b), enc2))                 w2 @ H/4
//! dec2 = SCOSS(fuse2(up2(dec3), enc1))              w1 @ H/2
//! dec1 = SCOSS(fuse1(up1(dec2), F1))                w0 @ H
//! DR   = head(SCOSS(dec1))                          3  @ H
//! FR   = DR + I
//! ```
//!
//! `downK` is a stride-2 3x3 conv, `upK` a 1x1 conv to four times the target
//! width followed by a 2x pixel shuffle, and `fuseK` either concatenation
//! plus a 1x1 conv or a plain sum.

use super::config::{ModelConfig, SkipFusion};
use super::store::{StoreSource, WeightStore};
use crate::blocks::scoss::{scoss_forward_with, ScossWeights};
use crate::census::{FlopReport, FlopScope};
use crate::error::{Error, Result};
use crate::nn::params::{Initializer, Recorder};
use crate::nn::{pixel_shuffle, Conv2d, ConvSpec, ParamInfo, ParamSource, Params};
use crate::ssm::ScanKernel;
use crate::tensor::Tensor;

/// Spatial extents must be divisible by this (three stride-2 stages).
pub const SPATIAL_MULTIPLE: usize = 8;

const IMAGE_CHANNELS: usize = 3;

#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub stem: Conv2d,
    pub downs: [Conv2d; 3],
    pub encoders: [ScossWeights; 3],
    pub bottleneck: ScossWeights,
    pub ups: [Conv2d; 3],
    pub fuses: [Option<Conv2d>; 3],
    pub decoders: [ScossWeights; 3],
    pub refine: ScossWeights,
    pub head: Conv2d,
}

/// Output of [`Model::forward_trace`].
#[derive(Clone, Debug)]
pub struct Trace {
    /// Predicted residual `DR`.
    pub residual: Tensor,
    /// `FR = DR + I`.
    pub output: Tensor,
}

fn stem_spec(cfg: &ModelConfig) -> ConvSpec {
    ConvSpec::same(IMAGE_CHANNELS, cfg.widths[0], 3)
}

fn down_spec(cfg: &ModelConfig, k: usize) -> ConvSpec {
    ConvSpec::same(cfg.widths[k - 1], cfg.widths[k], 3).with_stride(2)
}

fn up_spec(cfg: &ModelConfig, k: usize) -> ConvSpec {
    ConvSpec::pointwise(cfg.widths[k], 4 * cfg.widths[k - 1])
}

fn fuse_spec(cfg: &ModelConfig, k: usize) -> Option<ConvSpec> {
    let w = cfg.widths[k - 1];
    match cfg.skip_fusion {
        SkipFusion::Concat => Some(ConvSpec::pointwise(2 * w, w)),
        SkipFusion::Add => None,
    }
}

fn head_spec(cfg: &ModelConfig) -> ConvSpec {
    ConvSpec::same(cfg.widths[0], IMAGE_CHANNELS, 3)
}

impl Model {
    /// Declare and fetch every parameter from `src`; the single construction
    /// path for schema recording, initialization and loading.
    pub fn build(config: &ModelConfig, src: &mut dyn ParamSource) -> Result<Model> {
        config.validate()?;
        let cfg = config;
        let block = cfg.block();
        let w = cfg.widths;
        let mut p = Params::new(src);
        let stem = Conv2d::build(&mut p, "stem", stem_spec(cfg))?;
        let mut downs = Vec::new();
        let mut encoders = Vec::new();
        for k in 1..=3 {
            downs.push(Conv2d::build(
                &mut p,
                &format!("down{k}"),
                down_spec(cfg, k),
            )?);
            encoders.push(ScossWeights::build(
                &mut p,
                &format!("enc{k}"),
                w[k],
                &block,
            )?);
        }
        let bottleneck = ScossWeights::build(&mut p, "bottleneck", w[3], &block)?;
        let mut ups = Vec::new();
        let mut fuses = Vec::new();
        let mut decoders = Vec::new();
        for k in (1..=3).rev() {
            ups.push(Conv2d::build(&mut p, &format!("up{k}"), up_spec(cfg, k))?);
            fuses.push(match fuse_spec(cfg, k) {
                Some(spec) => Some(Conv2d::build(&mut p, &format!("fuse{k}"), spec)?),
                None => None,
            });
            decoders.push(ScossWeights::build(
                &mut p,
                &format!("dec{k}"),
                w[k - 1],
                &block,
            )?);
        }
        let refine = ScossWeights::build(&mut p, "refine", w[0], &block)?;
        let head = Conv2d::build(&mut p, "head", head_spec(cfg))?;
        // decoder vectors were filled deepest first; index them by level
        ups.reverse();
        fuses.reverse();
        decoders.reverse();
        Ok(Model {
            config: config.clone(),
            stem,
            downs: downs.try_into().expect("three levels"),
            encoders: encoders.try_into().expect("three levels"),
            bottleneck,
            ups: ups.try_into().expect("three levels"),
            fuses: fuses.try_into().expect("three levels"),
            decoders: decoders.try_into().expect("three levels"),
            refine,
            head,
        })
    }

    /// Build from a store, rejecting missing, mis-shaped and extra tensors.
    pub fn from_store(store: &WeightStore) -> Result<Model> {
        let mut src = StoreSource::new(store);
        let model = Model::build(&store.config, &mut src)?;
        src.finish()?;
        Ok(model)
    }

    pub fn forward(&self, image: &Tensor) -> Result<Tensor> {
        Ok(self.forward_trace(image)?.output)
    }

    pub fn forward_trace(&self, image: &Tensor) -> Result<Trace> {
        self.forward_trace_with(image, ScanKernel::Fast)
    }

    pub fn forward_trace_with(&self, image: &Tensor, kernel: ScanKernel) -> Result<Trace> {
        let (_, c, h, w) = image.dims4()?;
        if c != IMAGE_CHANNELS {
            return Err(Error::shape(format!(
                "expected an RGB batch (N, 3, H, W), got {:?}",
                image.shape()
            )));
        }
        if h % SPATIAL_MULTIPLE != 0 || w % SPATIAL_MULTIPLE != 0 {
            return Err(Error::InvalidArgument(format!(
                "image size {h}x{w} is not divisible by {SPATIAL_MULTIPLE}; \
                 pad (reflect) or resize the input first"
            )));
        }
        let scoss = |x: &Tensor, b: &ScossWeights| scoss_forward_with(x, b, kernel);

        let f1 = self.stem.forward(image)?;
        let mut skips = vec![f1];
        for k in 0..3 {
            let down = self.downs[k].forward(skips.last().expect("non-empty"))?;
            skips.push(scoss(&down, &self.encoders[k])?);
        }
        let mut x = scoss(&skips.pop().expect("enc3"), &self.bottleneck)?;
        for k in (0..3).rev() {
            let up = pixel_shuffle(&self.ups[k].forward(&x)?, 2)?;
            let skip = skips.pop().expect("skip per level");
            let fused = match &self.fuses[k] {
                Some(conv) => conv.forward(&Tensor::concat_channels(&[&up, &skip])?)?,
                None => up.add(&skip)?,
            };
            x = scoss(&fused, &self.decoders[k])?;
        }
        let refined = scoss(&x, &self.refine)?;
        let residual = self.head.forward(&refined)?;
        let output = residual.add(image)?;
        Ok(Trace { residual, output })
    }
}

/// Seeded initialization of every parameter of `config`.
pub fn init_weights(config: &ModelConfig, seed: u64) -> Result<WeightStore> {
    let mut init = Initializer::new(seed);
    Model::build(config, &mut init)?;
    let mut store = WeightStore::new(config.clone());
    for (name, t) in init.produced {
        store.insert(name, t);
    }
    Ok(store)
}

/// Every declared tensor, in declaration order, including BN statistics.
pub fn param_schema(config: &ModelConfig) -> Result<Vec<ParamInfo>> {
    let mut rec = Recorder::default();
    Model::build(config, &mut rec)?;
    Ok(rec.params)
}

/// Learnable parameters (BN running statistics are buffers and excluded).
pub fn count_params(config: &ModelConfig) -> Result<usize> {
    Ok(param_schema(config)?
        .iter()
        .filter(|p| !p.init.is_buffer())
        .map(|p| p.numel())
        .sum())
}

/// Analytic MAC census of one forward pass at `h x w`.
pub fn count_flops(config: &ModelConfig, h: usize, w: usize) -> Result<FlopReport> {
    config.validate()?;
    if !h.is_multiple_of(SPATIAL_MULTIPLE)
        || !w.is_multiple_of(SPATIAL_MULTIPLE)
        || h == 0
        || w == 0
    {
        return Err(Error::InvalidArgument(format!(
            "census size {h}x{w} must be a positive multiple of {SPATIAL_MULTIPLE}"
        )));
    }
    let block = config.block();
    let widths = config.widths;
    let mut report = FlopReport {
        params: count_params(config)?,
        height: h,
        width: w,
        ..Default::default()
    };
    let mut f = FlopScope::new(&mut report);
    let size = |k: usize| (h >> k, w >> k);

    f.add("stem", stem_spec(config).macs(h, w));
    for k in 1..=3 {
        let (ph, pw) = size(k - 1);
        f.add(&format!("down{k}"), down_spec(config, k).macs(ph, pw));
        let (lh, lw) = size(k);
        ScossWeights::count_macs(&mut f.scope(&format!("enc{k}")), widths[k], &block, lh, lw);
    }
    let (bh, bw) = size(3);
    ScossWeights::count_macs(&mut f.scope("bottleneck"), widths[3], &block, bh, bw);
    for k in (1..=3).rev() {
        let (sh, sw) = size(k);
        f.add(&format!("up{k}"), up_spec(config, k).macs(sh, sw));
        let (th, tw) = size(k - 1);
        if let Some(spec) = fuse_spec(config, k) {
            f.add(&format!("fuse{k}"), spec.macs(th, tw));
        }
        ScossWeights::count_macs(
            &mut f.scope(&format!("dec{k}")),
            widths[k - 1],
            &block,
            th,
            tw,
        );
    }
    ScossWeights::count_macs(&mut f.scope("refine"), widths[0], &block, h, w);
    f.add("head", head_spec(config).macs(h, w));
    Ok(report)
}
