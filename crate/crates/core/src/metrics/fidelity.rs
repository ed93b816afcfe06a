use super::constants::{LUMA_601, SSIM_K1, SSIM_K2, SSIM_RANGE, SSIM_SIGMA, SSIM_WINDOW};
use super::RgbPlanes;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// `10 log10(peak^2 / MSE)` over all elements. Identical inputs give
/// `f64::INFINITY`.
pub fn psnr(a: &Tensor, b: &Tensor, peak: f64) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!(
            "psnr: shapes differ, {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    if a.numel() == 0 {
        return Err(Error::shape("psnr: empty images"));
    }
    if peak.is_nan() || peak <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "psnr: peak must be positive, got {peak}"
        )));
    }
    let sse: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    let mse = sse / a.numel() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// Rec. 601 luma plane, row-major.
pub fn luma(image: &Tensor) -> Result<Vec<f64>> {
    let p = RgbPlanes::new(image)?;
    Ok((0..p.pixels())
        .map(|i| {
            LUMA_601[0] * p.r[i] as f64 + LUMA_601[1] * p.g[i] as f64 + LUMA_601[2] * p.b[i] as f64
        })
        .collect())
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut g = [0.0; SSIM_WINDOW];
    let centre = (SSIM_WINDOW / 2) as f64;
    for (i, v) in g.iter_mut().enumerate() {
        let d = i as f64 - centre;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let total: f64 = g.iter().sum();
    g.map(|v| v / total)
}

/// Separable Gaussian filter keeping only windows fully inside the image.
fn filter_valid(x: &[f64], h: usize, w: usize, g: &[f64]) -> Vec<f64> {
    let k = g.len();
    let (ho, wo) = (h - k + 1, w - k + 1);
    let mut rows = vec![0.0; h * wo];
    for r in 0..h {
        let line = &x[r * w..(r + 1) * w];
        for c in 0..wo {
            rows[r * wo + c] = g.iter().zip(&line[c..c + k]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ho * wo];
    for r in 0..ho {
        for c in 0..wo {
            out[r * wo + c] = g
                .iter()
                .enumerate()
                .map(|(i, a)| a * rows[(r + i) * wo + c])
                .sum();
        }
    }
    out
}

/// Single-scale SSIM on Rec. 601 luma: 11x11 Gaussian window with
/// sigma 1.5, `K1 = 0.01`, `K2 = 0.03`, dynamic range 1, averaged over the
/// windows that fit entirely inside the image.
pub fn ssim(a: &Tensor, b: &Tensor) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!(
            "ssim: shapes differ, {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let p = RgbPlanes::new(a)?;
    let (h, w) = (p.height, p.width);
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::InvalidArgument(format!(
            "ssim: image {h}x{w} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window; \
             resize it first"
        )));
    }
    let x = luma(a)?;
    let y = luma(b)?;
    let g = gaussian_window();
    let prod = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| p * q).collect::<Vec<_>>();
    let mu_x = filter_valid(&x, h, w, &g);
    let mu_y = filter_valid(&y, h, w, &g);
    let xx = filter_valid(&prod(&x, &x), h, w, &g);
    let yy = filter_valid(&prod(&y, &y), h, w, &g);
    let xy = filter_valid(&prod(&x, &y), h, w, &g);
    let c1 = (SSIM_K1 * SSIM_RANGE).powi(2);
    let c2 = (SSIM_K2 * SSIM_RANGE).powi(2);
    let mut total = 0.0;
    for i in 0..mu_x.len() {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let vx = xx[i] - mx * mx;
        let vy = yy[i] - my * my;
        let cov = xy[i] - mx * my;
        total +=
            ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    Ok(total / mu_x.len() as f64)
}
