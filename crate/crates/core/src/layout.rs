//! Scan orders over 2-D feature maps and the pooled-coordinate layout.
//!
//! A `(N, C, H, W)` map is flattened into four length `H*W` sequences, one
//! per [`ScanDirection`]. Sequence position `i` of each direction reads the
//! pixel `(h, w)` given by:
//!
//! | direction | order                                 | sequence index        |
//! |-----------|---------------------------------------|-----------------------|
//! | `RowMajor`       | rows top to bottom, left to right | `h*W + w`             |
//! | `RowMajorRev`    | reverse of `RowMajor`             | `HW-1 - (h*W + w)`    |
//! | `ColumnMajor`    | columns right to left, top to bottom | `(W-1-w)*H + h`    |
//! | `ColumnMajorRev` | reverse of `ColumnMajor`          | `HW-1 - ((W-1-w)*H + h)` |

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScanDirection {
    RowMajor,
    RowMajorRev,
    ColumnMajor,
    ColumnMajorRev,
}

impl ScanDirection {
    pub const ALL: [ScanDirection; 4] = [
        ScanDirection::RowMajor,
        ScanDirection::RowMajorRev,
        ScanDirection::ColumnMajor,
        ScanDirection::ColumnMajorRev,
    ];

    /// Sequence index of pixel `(h, w)` in an `height x width` map.
    #[inline]
    pub fn index(self, h: usize, w: usize, height: usize, width: usize) -> usize {
        let last = height * width - 1;
        match self {
            ScanDirection::RowMajor => h * width + w,
            ScanDirection::RowMajorRev => last - (h * width + w),
            ScanDirection::ColumnMajor => (width - 1 - w) * height + h,
            ScanDirection::ColumnMajorRev => last - ((width - 1 - w) * height + h),
        }
    }

    /// `perm[pixel] = sequence index`, pixels in row-major order.
    pub fn permutation(self, height: usize, width: usize) -> Vec<usize> {
        let mut perm = Vec::with_capacity(height * width);
        for h in 0..height {
            for w in 0..width {
                perm.push(self.index(h, w, height, width));
            }
        }
        perm
    }
}

/// Flatten `(N, C, H, W)` into `(N, C, H*W)` along `dir`.
pub fn flatten(x: &Tensor, dir: ScanDirection) -> Result<Tensor> {
    let (n, c, h, w) = x.dims4()?;
    let perm = dir.permutation(h, w);
    let plane = h * w;
    let mut out = vec![0.0f32; x.numel()];
    for (src, dst) in x.data().chunks(plane).zip(out.chunks_mut(plane)) {
        for (p, &i) in perm.iter().enumerate() {
            dst[i] = src[p];
        }
    }
    Tensor::new(&[n, c, plane], out)
}

/// Inverse of [`flatten`]: `(N, C, H*W)` back to `(N, C, H, W)`.
pub fn unflatten(seq: &Tensor, dir: ScanDirection, height: usize, width: usize) -> Result<Tensor> {
    let (n, c, l) = seq.dims3()?;
    if l != height * width {
        return Err(Error::shape(format!(
            "unflatten: sequence length {l} != {height}x{width}"
        )));
    }
    let perm = dir.permutation(height, width);
    let mut out = vec![0.0f32; seq.numel()];
    for (src, dst) in seq.data().chunks(l).zip(out.chunks_mut(l)) {
        for (p, &i) in perm.iter().enumerate() {
            dst[p] = src[i];
        }
    }
    Tensor::new(&[n, c, height, width], out)
}

/// The four directional sequences of `x`, in [`ScanDirection::ALL`] order.
pub fn flatten_directions(x: &Tensor) -> Result<[Tensor; 4]> {
    Ok([
        flatten(x, ScanDirection::ALL[0])?,
        flatten(x, ScanDirection::ALL[1])?,
        flatten(x, ScanDirection::ALL[2])?,
        flatten(x, ScanDirection::ALL[3])?,
    ])
}

/// Un-permute each directional sequence back to the grid and sum them.
pub fn merge_directions(seqs: &[Tensor; 4], height: usize, width: usize) -> Result<Tensor> {
    let mut acc = unflatten(&seqs[0], ScanDirection::ALL[0], height, width)?;
    for (seq, dir) in seqs.iter().zip(ScanDirection::ALL).skip(1) {
        acc.add_assign(&unflatten(seq, dir, height, width)?)?;
    }
    Ok(acc)
}

/// Join the height-pooled `(N, C, 1, W)` and width-pooled `(N, C, H, 1)` maps
/// into `(N, C, 1, W + H)`: the `W` entries first, then the `H` entries.
pub fn coordinate_concat(pooled_h: &Tensor, pooled_w: &Tensor) -> Result<Tensor> {
    let (n, c, one_a, width) = pooled_h.dims4()?;
    let (n2, c2, height, one_b) = pooled_w.dims4()?;
    if one_a != 1 || one_b != 1 || n != n2 || c != c2 {
        return Err(Error::shape(format!(
            "coordinate_concat: expected (N, C, 1, W) and (N, C, H, 1), got {:?} and {:?}",
            pooled_h.shape(),
            pooled_w.shape()
        )));
    }
    let mut out = Vec::with_capacity(n * c * (width + height));
    for (a, b) in pooled_h
        .data()
        .chunks(width)
        .zip(pooled_w.data().chunks(height))
    {
        out.extend_from_slice(a);
        out.extend_from_slice(b);
    }
    Tensor::new(&[n, c, 1, width + height], out)
}

/// Inverse of [`coordinate_concat`] for a map of the given `width`.
pub fn coordinate_split(joined: &Tensor, width: usize) -> Result<(Tensor, Tensor)> {
    let (n, c, one, total) = joined.dims4()?;
    if one != 1 || width == 0 || width >= total {
        return Err(Error::shape(format!(
            "coordinate_split: cannot split {:?} at width {width}",
            joined.shape()
        )));
    }
    let height = total - width;
    let mut a = Vec::with_capacity(n * c * width);
    let mut b = Vec::with_capacity(n * c * height);
    for row in joined.data().chunks(total) {
        a.extend_from_slice(&row[..width]);
        b.extend_from_slice(&row[width..]);
    }
    Ok((
        Tensor::new(&[n, c, 1, width], a)?,
        Tensor::new(&[n, c, height, 1], b)?,
    ))
}
