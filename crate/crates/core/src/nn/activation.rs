//! Elementwise activations and softmax.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Silu,
    Relu,
    Sigmoid,
}

/// Zero for subnormal inputs, identity otherwise.
///
/// Saturating activations produce subnormals for large negative inputs, and
/// subnormal arithmetic is one to two orders of magnitude slower on common
/// CPUs. Values that small carry no signal, so they are cut to zero.
#[inline(always)]
pub fn flush_subnormal(x: f32) -> f32 {
    if x.abs() < f32::MIN_POSITIVE {
        0.0
    } else {
        x
    }
}

#[inline]
pub fn sigmoid(x: f32) -> f32 {
    let s = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    flush_subnormal(s)
}

#[inline]
pub fn silu(x: f32) -> f32 {
    flush_subnormal(x * sigmoid(x))
}

#[inline]
pub fn relu(x: f32) -> f32 {
    x.max(0.0)
}

/// `ln(1 + e^x)`, linear above 20.
#[inline]
pub fn softplus(x: f32) -> f32 {
    if x > 20.0 {
        x
    } else {
        flush_subnormal((x as f64).exp().ln_1p() as f32)
    }
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f32) -> f32 {
        match self {
            Activation::Silu => silu(x),
            Activation::Relu => relu(x),
            Activation::Sigmoid => sigmoid(x),
        }
    }
}

pub fn activate(input: &Tensor, kind: Activation) -> Tensor {
    input.map(|v| kind.apply(v))
}

pub fn activate_inplace(t: &mut Tensor, kind: Activation) {
    t.map_inplace(|v| kind.apply(v));
}

/// Softmax along `axis` with max subtraction; sums are taken in `f64`.
pub fn softmax(input: &Tensor, axis: usize) -> Result<Tensor> {
    let shape = input.shape();
    if axis >= shape.len() {
        return Err(Error::shape(format!(
            "softmax axis {axis} out of range for {shape:?}"
        )));
    }
    let outer: usize = shape[..axis].iter().product();
    let len = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let x = input.data();
    let mut out = vec![0.0f32; x.len()];
    let mut max = vec![f32::NEG_INFINITY; inner];
    let mut sum = vec![0.0f64; inner];
    for o in 0..outer {
        let base = o * len * inner;
        max.fill(f32::NEG_INFINITY);
        sum.fill(0.0);
        for k in 0..len {
            let row = &x[base + k * inner..base + (k + 1) * inner];
            for (m, &v) in max.iter_mut().zip(row) {
                *m = m.max(v);
            }
        }
        for k in 0..len {
            let row = &x[base + k * inner..base + (k + 1) * inner];
            let dst = &mut out[base + k * inner..base + (k + 1) * inner];
            for (((d, &v), &m), s) in dst.iter_mut().zip(row).zip(&max).zip(sum.iter_mut()) {
                let e = ((v - m) as f64).exp();
                *d = e as f32;
                *s += e;
            }
        }
        for k in 0..len {
            let dst = &mut out[base + k * inner..base + (k + 1) * inner];
            for (d, &s) in dst.iter_mut().zip(&sum) {
                *d = flush_subnormal((*d as f64 / s) as f32);
            }
        }
    }
    Tensor::new(shape, out)
}
