//! Channel-axis normalization.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const NORM_EPS: f64 = 1e-5;

/// Splits a rank-3 or rank-4 shape into `(batch, channels, sites)`.
fn channel_layout(input: &Tensor) -> Result<(usize, usize, usize)> {
    match input.shape() {
        [n, c, l] => Ok((*n, *c, *l)),
        [n, c, h, w] => Ok((*n, *c, h * w)),
        s => Err(Error::shape(format!(
            "normalization expects (N, C, ...) rank 3 or 4, got {s:?}"
        ))),
    }
}

fn check_affine(c: usize, gamma: &Tensor, beta: &Tensor) -> Result<()> {
    if gamma.shape() != [c] || beta.shape() != [c] {
        return Err(Error::shape(format!(
            "norm affine expects [{c}], got gamma {:?} beta {:?}",
            gamma.shape(),
            beta.shape()
        )));
    }
    Ok(())
}

/// Layer normalization over the channel vector at every spatial site
/// (population variance, `eps = 1e-5`).
pub fn layer_norm(input: &Tensor, gamma: &Tensor, beta: &Tensor) -> Result<Tensor> {
    let (n, c, sites) = channel_layout(input)?;
    check_affine(c, gamma, beta)?;
    let x = input.data();
    let mut out = vec![0.0f32; x.len()];
    let mut mean = vec![0.0f64; sites];
    let mut var = vec![0.0f64; sites];
    for b in 0..n {
        let base = b * c * sites;
        mean.fill(0.0);
        var.fill(0.0);
        for ch in 0..c {
            let row = &x[base + ch * sites..base + (ch + 1) * sites];
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v as f64;
            }
        }
        mean.iter_mut().for_each(|m| *m /= c as f64);
        for ch in 0..c {
            let row = &x[base + ch * sites..base + (ch + 1) * sites];
            for ((s, &m), &v) in var.iter_mut().zip(&mean).zip(row) {
                let d = v as f64 - m;
                *s += d * d;
            }
        }
        // var now holds 1 / sqrt(var + eps)
        var.iter_mut()
            .for_each(|s| *s = 1.0 / (*s / c as f64 + NORM_EPS).sqrt());
        for ch in 0..c {
            let g = gamma.data()[ch] as f64;
            let bt = beta.data()[ch] as f64;
            let src = &x[base + ch * sites..base + (ch + 1) * sites];
            let dst = &mut out[base + ch * sites..base + (ch + 1) * sites];
            for (((o, &v), &m), &r) in dst.iter_mut().zip(src).zip(&mean).zip(&var) {
                *o = ((v as f64 - m) * r * g + bt) as f32;
            }
        }
    }
    Tensor::new(input.shape(), out)
}

/// Inference-mode batch normalization with stored running statistics.
pub fn batch_norm(
    input: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    running_mean: &Tensor,
    running_var: &Tensor,
) -> Result<Tensor> {
    let (n, c, sites) = channel_layout(input)?;
    check_affine(c, gamma, beta)?;
    check_affine(c, running_mean, running_var)?;
    let mut out = input.clone();
    let data = out.data_mut();
    for b in 0..n {
        for ch in 0..c {
            let inv = 1.0 / (running_var.data()[ch] as f64 + NORM_EPS).sqrt();
            let scale = gamma.data()[ch] as f64 * inv;
            let shift = beta.data()[ch] as f64 - running_mean.data()[ch] as f64 * scale;
            let row = &mut data[(b * c + ch) * sites..(b * c + ch + 1) * sites];
            for v in row {
                *v = (*v as f64 * scale + shift) as f32;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn ones(c: usize) -> Tensor {
        Tensor::full(&[c], 1.0)
    }

    #[test]
    fn two_channel_vector() {
        let x = Tensor::new(&[1, 2, 1, 1], vec![1.0, 3.0]).unwrap();
        let y = layer_norm(&x, &ones(2), &Tensor::zeros(&[2])).unwrap();
        assert!((y.data()[0] + 1.0).abs() < 1e-4);
        assert!((y.data()[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn constant_vector_normalizes_to_zero() {
        let x = Tensor::full(&[1, 5, 2, 3], 4.25);
        let y = layer_norm(&x, &ones(5), &Tensor::zeros(&[5])).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_channel_returns_beta() {
        let x = Tensor::new(&[1, 1, 1, 3], vec![1.0, -2.0, 7.0]).unwrap();
        let beta = Tensor::new(&[1], vec![0.5]).unwrap();
        let y = layer_norm(&x, &ones(1), &beta).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn zero_gamma_gives_beta() {
        let mut rng = Rng::new(1);
        let x = Tensor::from_fn(&[2, 3, 4, 4], |_| rng.normal());
        let beta = Tensor::new(&[3], vec![0.1, -0.2, 0.3]).unwrap();
        let y = layer_norm(&x, &Tensor::zeros(&[3]), &beta).unwrap();
        for (i, &v) in y.data().iter().enumerate() {
            assert_eq!(v, beta.data()[(i / 16) % 3]);
        }
    }

    #[test]
    fn normalized_statistics() {
        let mut rng = Rng::new(2);
        let (c, sites) = (16, 49);
        let x = Tensor::from_fn(&[2, c, 7, 7], |_| 3.0 * rng.normal() + 1.5);
        let y = layer_norm(&x, &ones(c), &Tensor::zeros(&[c])).unwrap();
        for b in 0..2 {
            for s in 0..sites {
                let vals: Vec<f64> = (0..c)
                    .map(|ch| y.data()[(b * c + ch) * sites + s] as f64)
                    .collect();
                let m = vals.iter().sum::<f64>() / c as f64;
                let v = vals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / c as f64;
                assert!(m.abs() <= 1e-5);
                assert!((v - 1.0).abs() <= 1e-3);
            }
        }
    }

    #[test]
    fn batch_norm_default_stats_is_near_identity() {
        let x = Tensor::new(&[1, 2, 1, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = batch_norm(
            &x,
            &ones(2),
            &Tensor::zeros(&[2]),
            &Tensor::zeros(&[2]),
            &ones(2),
        )
        .unwrap();
        assert!(y.max_abs_diff(&x).unwrap() < 1e-4);
    }
}
