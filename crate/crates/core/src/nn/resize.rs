//! Resampling: bilinear resize and sub-pixel (pixel) shuffle.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Half-pixel bilinear resize (`align_corners = false`).
///
/// Destination index `d` samples source coordinate
/// `s = (d + 0.5) * in / out - 0.5`, clamped to `[0, in - 1]`; the two
/// neighbours are `floor(s)` and `min(floor(s) + 1, in - 1)`.
pub fn resize_bilinear(input: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let (n, c, h, w) = input.dims4()?;
    if out_h == 0 || out_w == 0 {
        return Err(Error::InvalidArgument("resize target must be >= 1".into()));
    }
    let taps = |inp: usize, out: usize| -> Vec<(usize, usize, f64)> {
        let scale = inp as f64 / out as f64;
        (0..out)
            .map(|d| {
                let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (inp - 1) as f64);
                let i0 = s.floor() as usize;
                let i1 = (i0 + 1).min(inp - 1);
                (i0, i1, s - i0 as f64)
            })
            .collect()
    };
    let ys = taps(h, out_h);
    let xs = taps(w, out_w);
    let mut out = Vec::with_capacity(n * c * out_h * out_w);
    for plane in input.data().chunks_exact(h * w) {
        for &(y0, y1, fy) in &ys {
            for &(x0, x1, fx) in &xs {
                let p = |y: usize, x: usize| plane[y * w + x] as f64;
                let top = p(y0, x0) * (1.0 - fx) + p(y0, x1) * fx;
                let bot = p(y1, x0) * (1.0 - fx) + p(y1, x1) * fx;
                out.push((top * (1.0 - fy) + bot * fy) as f32);
            }
        }
    }
    Tensor::new(&[n, c, out_h, out_w], out)
}

/// `(N, C*r*r, H, W) -> (N, C, H*r, W*r)` with
/// `out[c][h*r + i][w*r + j] = in[c*r*r + i*r + j][h][w]`.
pub fn pixel_shuffle(input: &Tensor, r: usize) -> Result<Tensor> {
    let (n, c, h, w) = input.dims4()?;
    if r == 0 || c % (r * r) != 0 {
        return Err(Error::shape(format!(
            "pixel_shuffle: {c} channels not divisible by {}",
            r * r
        )));
    }
    let co = c / (r * r);
    let (ho, wo) = (h * r, w * r);
    let x = input.data();
    let mut out = vec![0.0f32; x.len()];
    for b in 0..n {
        for oc in 0..co {
            for i in 0..r {
                for j in 0..r {
                    let ic = oc * r * r + i * r + j;
                    let src = &x[((b * c + ic) * h) * w..((b * c + ic + 1) * h) * w];
                    for y in 0..h {
                        let dst_row = ((b * co + oc) * ho + y * r + i) * wo;
                        for xx in 0..w {
                            out[dst_row + xx * r + j] = src[y * w + xx];
                        }
                    }
                }
            }
        }
    }
    Tensor::new(&[n, co, ho, wo], out)
}

/// Inverse of [`pixel_shuffle`].
pub fn pixel_unshuffle(input: &Tensor, r: usize) -> Result<Tensor> {
    let (n, c, h, w) = input.dims4()?;
    if r == 0 || h % r != 0 || w % r != 0 {
        return Err(Error::shape(format!(
            "pixel_unshuffle: {h}x{w} not divisible by {r}"
        )));
    }
    let (hi, wi) = (h / r, w / r);
    let ci = c * r * r;
    let x = input.data();
    let mut out = vec![0.0f32; x.len()];
    for b in 0..n {
        for oc in 0..c {
            for i in 0..r {
                for j in 0..r {
                    let ic = oc * r * r + i * r + j;
                    for y in 0..hi {
                        for xx in 0..wi {
                            out[((b * ci + ic) * hi + y) * wi + xx] =
                                x[((b * c + oc) * h + y * r + i) * w + xx * r + j];
                        }
                    }
                }
            }
        }
    }
    Tensor::new(&[n, ci, hi, wi], out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn shuffle_layout() {
        let x = Tensor::new(&[1, 4, 1, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = pixel_shuffle(&x, 2).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 2]);
        assert_eq!(y.data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn shuffle_rejects_indivisible_channels() {
        assert!(pixel_shuffle(&Tensor::zeros(&[1, 6, 2, 2]), 2).is_err());
    }

    #[test]
    fn shuffle_roundtrip() {
        let mut rng = Rng::new(9);
        let x = Tensor::from_fn(&[2, 12, 3, 5], |_| rng.normal());
        let y = pixel_shuffle(&x, 2).unwrap();
        assert_eq!(y.shape(), &[2, 3, 6, 10]);
        assert_eq!(pixel_unshuffle(&y, 2).unwrap(), x);
    }

    #[test]
    fn resize_identity() {
        let x = Tensor::new(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(resize_bilinear(&x, 2, 2).unwrap(), x);
    }

    #[test]
    fn resize_half_pixel_convention() {
        let x = Tensor::new(&[1, 1, 1, 2], vec![0.0, 2.0]).unwrap();
        let y = resize_bilinear(&x, 1, 4).unwrap();
        assert_eq!(y.data(), &[0.0, 0.5, 1.5, 2.0]);
    }
}
