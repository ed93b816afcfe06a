//! Grouped 2D cross-correlation.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Geometry of a 2D convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub groups: usize,
    pub bias: bool,
}

impl ConvSpec {
    /// Dense stride-1 convolution with "same" padding `(k - 1) / 2`.
    pub fn same(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        ConvSpec {
            in_channels,
            out_channels,
            kernel,
            stride: 1,
            padding: kernel.saturating_sub(1) / 2,
            groups: 1,
            bias: true,
        }
    }

    /// Depth-wise stride-1 convolution (`groups == channels`) with "same" padding.
    pub fn depthwise(channels: usize, kernel: usize) -> Self {
        ConvSpec {
            groups: channels,
            ..Self::same(channels, channels, kernel)
        }
    }

    /// Pointwise (1x1) dense convolution, i.e. a per-pixel linear layer.
    pub fn pointwise(in_channels: usize, out_channels: usize) -> Self {
        Self::same(in_channels, out_channels, 1)
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn without_bias(mut self) -> Self {
        self.bias = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel == 0 || self.kernel.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "conv kernel size must be odd, got {}",
                self.kernel
            )));
        }
        if self.stride == 0 || self.groups == 0 {
            return Err(Error::InvalidArgument(
                "conv stride and groups must be >= 1".into(),
            ));
        }
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::InvalidArgument("conv channels must be >= 1".into()));
        }
        if !self.in_channels.is_multiple_of(self.groups)
            || !self.out_channels.is_multiple_of(self.groups)
        {
            return Err(Error::InvalidArgument(format!(
                "channels {}->{} not divisible by groups {}",
                self.in_channels, self.out_channels, self.groups
            )));
        }
        Ok(())
    }

    pub fn weight_shape(&self) -> [usize; 4] {
        [
            self.out_channels,
            self.in_channels / self.groups,
            self.kernel,
            self.kernel,
        ]
    }

    pub fn fan_in(&self) -> usize {
        self.in_channels / self.groups * self.kernel * self.kernel
    }

    pub fn param_count(&self) -> usize {
        let w: usize = self.weight_shape().iter().product();
        w + if self.bias { self.out_channels } else { 0 }
    }

    pub fn output_size(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let span = |x: usize| -> Result<usize> {
            let padded = x + 2 * self.padding;
            if padded < self.kernel {
                return Err(Error::shape(format!(
                    "input extent {x} too small for kernel {} with padding {}",
                    self.kernel, self.padding
                )));
            }
            Ok((padded - self.kernel) / self.stride + 1)
        };
        Ok((span(h)?, span(w)?))
    }

    /// Multiply-accumulates for one input of spatial size `h x w`.
    pub fn macs(&self, h: usize, w: usize) -> u64 {
        let (ho, wo) = self.output_size(h, w).unwrap_or((0, 0));
        (self.kernel * self.kernel * self.in_channels / self.groups * self.out_channels * ho * wo)
            as u64
    }
}

/// Cross-correlation (kernels are not flipped) with zero padding.
///
/// Accumulation is in `f64`. Dense convolutions run as im2col + DGEMM over
/// strips of output rows; grouped ones accumulate directly. Every strip or
/// plane is computed by one task in a fixed order, so results do not depend
/// on the worker count.
pub fn conv2d(
    input: &Tensor,
    spec: &ConvSpec,
    weight: &Tensor,
    bias: Option<&Tensor>,
) -> Result<Tensor> {
    spec.validate()?;
    let (n, c, h, w) = input.dims4()?;
    if c != spec.in_channels {
        return Err(Error::shape(format!(
            "conv2d: input has {c} channels, layer expects {}",
            spec.in_channels
        )));
    }
    if weight.shape() != spec.weight_shape() {
        return Err(Error::shape(format!(
            "conv2d: weight shape {:?}, expected {:?}",
            weight.shape(),
            spec.weight_shape()
        )));
    }
    if let Some(b) = bias {
        if b.shape() != [spec.out_channels] {
            return Err(Error::shape(format!(
                "conv2d: bias shape {:?}, expected [{}]",
                b.shape(),
                spec.out_channels
            )));
        }
    }
    let (ho, wo) = spec.output_size(h, w)?;
    let out_plane = ho * wo;
    let mut out = vec![0.0f32; n * spec.out_channels * out_plane];
    if spec.groups == 1 {
        dense(
            input.data(),
            weight.data(),
            bias,
            spec,
            (n, h, w),
            (ho, wo),
            &mut out,
        );
    } else {
        grouped(
            input.data(),
            weight.data(),
            bias,
            spec,
            (c, h, w),
            (ho, wo),
            &mut out,
        );
    }
    Tensor::new(&[n, spec.out_channels, ho, wo], out)
}

/// Upper bound on the im2col buffer, in values.
const COLUMN_BUDGET: usize = 1 << 20;

/// `out = W (Cout x K) * cols (K x P)` with `P` a strip of output pixels.
fn gemm(
    m: usize,
    k: usize,
    p: usize,
    weight: &[f64],
    cols: &[f64],
    out: &mut [f64],
    out_stride: usize,
) {
    debug_assert!(weight.len() >= m * k && cols.len() >= k * p);
    debug_assert!(m == 0 || out.len() >= (m - 1) * out_stride + p);
    // SAFETY: the asserted extents cover every index the strides reach.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            p,
            1.0,
            weight.as_ptr(),
            k as isize,
            1,
            cols.as_ptr(),
            p as isize,
            1,
            0.0,
            out.as_mut_ptr(),
            out_stride as isize,
            1,
        );
    }
}

/// Dense convolution: im2col over strips of output rows, then one `f64`
/// matrix product per strip. Strips are independent and run in parallel.
fn dense(
    x: &[f32],
    wt: &[f32],
    bias: Option<&Tensor>,
    spec: &ConvSpec,
    (n, h, w): (usize, usize, usize),
    (ho, wo): (usize, usize),
    out: &mut [f32],
) {
    let cin = spec.in_channels;
    let cout = spec.out_channels;
    let k = spec.kernel;
    let depth = cin * k * k;
    let plane = ho * wo;
    let pointwise = k == 1 && spec.stride == 1 && spec.padding == 0;
    let rows_per_strip = (COLUMN_BUDGET / (depth * wo).max(1)).clamp(1, ho);
    let strips = ho.div_ceil(rows_per_strip);
    let wt: Vec<f64> = wt.iter().map(|&v| v as f64).collect();

    let results: Vec<(usize, usize, Vec<f64>)> = (0..n * strips)
        .into_par_iter()
        .map(|job| {
            let b = job / strips;
            let oy0 = (job % strips) * rows_per_strip;
            let oy1 = (oy0 + rows_per_strip).min(ho);
            let p = (oy1 - oy0) * wo;
            let src = &x[b * cin * h * w..(b + 1) * cin * h * w];
            let mut local = vec![0.0f64; cout * p];
            if pointwise {
                // the input plane itself is the column matrix (row stride h*w)
                let mut strip = vec![0.0f64; cin * p];
                for ic in 0..cin {
                    let base = ic * h * w + oy0 * wo;
                    for (d, &v) in strip[ic * p..(ic + 1) * p]
                        .iter_mut()
                        .zip(&src[base..base + p])
                    {
                        *d = v as f64;
                    }
                }
                gemm(cout, cin, p, &wt, &strip, &mut local, p);
            } else {
                let cols = im2col(src, spec, (h, w), wo, oy0, oy1);
                gemm(cout, depth, p, &wt, &cols, &mut local, p);
            }
            (b, oy0, local)
        })
        .collect();

    for (b, oy0, local) in results {
        let p = local.len() / cout;
        for oc in 0..cout {
            let bias_v = bias.map_or(0.0, |t| t.data()[oc] as f64);
            let dst = &mut out[(b * cout + oc) * plane + oy0 * wo..][..p];
            for (d, &v) in dst.iter_mut().zip(&local[oc * p..(oc + 1) * p]) {
                *d = (v + bias_v) as f32;
            }
        }
    }
}

/// Column matrix `(cin*k*k, rows*wo)` for output rows `[oy0, oy1)`.
fn im2col(
    src: &[f32],
    spec: &ConvSpec,
    (h, w): (usize, usize),
    wo: usize,
    oy0: usize,
    oy1: usize,
) -> Vec<f64> {
    let k = spec.kernel;
    let s = spec.stride;
    let pad = spec.padding;
    let p = (oy1 - oy0) * wo;
    let mut cols = vec![0.0f64; spec.in_channels * k * k * p];
    for ic in 0..spec.in_channels {
        let chan = &src[ic * h * w..(ic + 1) * h * w];
        for ky in 0..k {
            for kx in 0..k {
                let row_out = &mut cols[((ic * k + ky) * k + kx) * p..][..p];
                let (lo, hi) = column_range(kx, s, pad, w, wo);
                for oy in oy0..oy1 {
                    let iy = (oy * s + ky) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize || lo >= hi {
                        continue;
                    }
                    let line = &chan[iy as usize * w..(iy as usize + 1) * w];
                    let dst = &mut row_out[(oy - oy0) * wo..(oy - oy0 + 1) * wo];
                    let first = lo * s + kx - pad;
                    for (j, d) in dst[lo..hi].iter_mut().enumerate() {
                        *d = line[first + j * s] as f64;
                    }
                }
            }
        }
    }
    cols
}

/// Output columns `[lo, hi)` whose tap `kx` lands inside the input row.
fn column_range(kx: usize, s: usize, pad: usize, w: usize, wo: usize) -> (usize, usize) {
    let lo = if kx >= pad { 0 } else { (pad - kx).div_ceil(s) };
    let hi = if w + pad > kx {
        ((w + pad - kx - 1) / s + 1).min(wo)
    } else {
        0
    };
    (lo, hi.max(lo))
}

/// Grouped (including depth-wise) convolution, one output plane per task,
/// accumulated row by row.
fn grouped(
    x: &[f32],
    wt: &[f32],
    bias: Option<&Tensor>,
    spec: &ConvSpec,
    (c, h, w): (usize, usize, usize),
    (ho, wo): (usize, usize),
    out: &mut [f32],
) {
    let cin_g = spec.in_channels / spec.groups;
    let cout_g = spec.out_channels / spec.groups;
    let k = spec.kernel;
    let s = spec.stride;
    let pad = spec.padding;
    let ranges: Vec<(usize, usize)> = (0..k).map(|kx| column_range(kx, s, pad, w, wo)).collect();

    out.par_chunks_mut(ho * wo)
        .enumerate()
        .for_each(|(idx, plane)| {
            let b = idx / spec.out_channels;
            let oc = idx % spec.out_channels;
            let g = oc / cout_g;
            let bias_v = bias.map_or(0.0, |t| t.data()[oc] as f64);
            let mut acc = vec![0.0f64; wo];
            let inputs = &x[(b * c + g * cin_g) * h * w..][..cin_g * h * w];
            let kernels = &wt[oc * cin_g * k * k..][..cin_g * k * k];
            for oy in 0..ho {
                acc.fill(bias_v);
                for ic in 0..cin_g {
                    let chan = &inputs[ic * h * w..(ic + 1) * h * w];
                    for ky in 0..k {
                        let iy = (oy * s + ky) as isize - pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let row = &chan[iy as usize * w..(iy as usize + 1) * w];
                        for (kx, &wv) in kernels[(ic * k + ky) * k..][..k].iter().enumerate() {
                            let wv = wv as f64;
                            let (lo, hi) = ranges[kx];
                            if lo >= hi {
                                continue;
                            }
                            let first = lo * s + kx - pad;
                            if s == 1 {
                                for (a, &v) in
                                    acc[lo..hi].iter_mut().zip(&row[first..first + hi - lo])
                                {
                                    *a += wv * v as f64;
                                }
                            } else {
                                for (j, a) in acc[lo..hi].iter_mut().enumerate() {
                                    *a += wv * row[first + j * s] as f64;
                                }
                            }
                        }
                    }
                }
                for (o, &a) in plane[oy * wo..(oy + 1) * wo].iter_mut().zip(&acc) {
                    *o = a as f32;
                }
            }
        });
}
