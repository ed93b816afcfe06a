//! UCIQE: chroma spread, luminance contrast and mean saturation in CIELab.

use super::constants::{
    LAB_EPSILON, LAB_KAPPA, SRGB_TO_XYZ, UCIQE_C1, UCIQE_C2, UCIQE_C3, UCIQE_HIGH_PERCENTILE,
    UCIQE_LAB_SCALE, UCIQE_LOW_PERCENTILE,
};
use super::RgbPlanes;
use crate::error::Result;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UciqeComponents {
    /// Standard deviation of chroma.
    pub chroma_std: f64,
    /// Spread between the 99th and 1st luminance percentiles.
    pub luma_contrast: f64,
    /// Mean of chroma / lightness.
    pub saturation_mean: f64,
}

impl UciqeComponents {
    pub fn total(&self) -> f64 {
        UCIQE_C1 * self.chroma_std + UCIQE_C2 * self.luma_contrast + UCIQE_C3 * self.saturation_mean
    }
}

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    if t > LAB_EPSILON {
        t.cbrt()
    } else {
        (LAB_KAPPA * t + 16.0) / 116.0
    }
}

/// sRGB in `[0, 1]` to CIELab (`L` in 0..100). The D65 white point is the
/// image of RGB white under the matrix, so neutral inputs have `a = b = 0`.
pub fn srgb_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let lin = rgb.map(srgb_to_linear);
    let mut f = [0.0; 3];
    for (k, row) in SRGB_TO_XYZ.iter().enumerate() {
        let white: f64 = row.iter().sum();
        let v: f64 = row.iter().zip(&lin).map(|(m, c)| m * c).sum();
        f[k] = lab_f(v / white);
    }
    [
        116.0 * f[1] - 16.0,
        500.0 * (f[0] - f[1]),
        200.0 * (f[1] - f[2]),
    ]
}

/// Linear-interpolated percentile of sorted data, `q` in `[0, 1]`.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn uciqe_components(image: &Tensor) -> Result<UciqeComponents> {
    let p = RgbPlanes::new(image)?;
    let n = p.pixels();
    let mut light = Vec::with_capacity(n);
    let mut chroma = Vec::with_capacity(n);
    let mut saturation = 0.0;
    for i in 0..n {
        let [l, a, b] =
            srgb_to_lab([p.r[i] as f64, p.g[i] as f64, p.b[i] as f64]).map(|v| v / UCIQE_LAB_SCALE);
        let c = a.hypot(b);
        if l > 0.0 {
            saturation += c / l;
        }
        light.push(l);
        chroma.push(c);
    }
    let mean_c = chroma.iter().sum::<f64>() / n as f64;
    let var_c = chroma.iter().map(|c| (c - mean_c).powi(2)).sum::<f64>() / n as f64;
    light.sort_by(f64::total_cmp);
    Ok(UciqeComponents {
        chroma_std: var_c.sqrt(),
        luma_contrast: percentile(&light, UCIQE_HIGH_PERCENTILE)
            - percentile(&light, UCIQE_LOW_PERCENTILE),
        saturation_mean: saturation / n as f64,
    })
}

/// `0.4680 sigma_c + 0.2745 con_L + 0.2576 mu_s`.
pub fn uciqe(image: &Tensor) -> Result<f64> {
    Ok(uciqe_components(image)?.total())
}
