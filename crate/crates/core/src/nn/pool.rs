//! Axis-wise global average pooling.

use crate::error::Result;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoolAxis {
    /// Average over rows: `(N, C, H, W) -> (N, C, 1, W)`.
    Height,
    /// Average over columns: `(N, C, H, W) -> (N, C, H, 1)`.
    Width,
}

pub fn pool_axis(input: &Tensor, axis: PoolAxis) -> Result<Tensor> {
    let (n, c, h, w) = input.dims4()?;
    let x = input.data();
    match axis {
        PoolAxis::Height => {
            let mut out = Vec::with_capacity(n * c * w);
            let mut acc = vec![0.0f64; w];
            for plane in x.chunks_exact(h * w) {
                acc.fill(0.0);
                for row in plane.chunks_exact(w) {
                    for (a, &v) in acc.iter_mut().zip(row) {
                        *a += v as f64;
                    }
                }
                out.extend(acc.iter().map(|a| (a / h as f64) as f32));
            }
            Tensor::new(&[n, c, 1, w], out)
        }
        PoolAxis::Width => {
            let out = x
                .chunks_exact(w)
                .map(|row| (row.iter().map(|&v| v as f64).sum::<f64>() / w as f64) as f32)
                .collect();
            Tensor::new(&[n, c, h, 1], out)
        }
    }
}
