//! UIQM: a weighted sum of colourfulness (UICM), sharpness (UISM) and
//! contrast (UIConM), evaluated on the 0..255 intensity scale.

use super::constants::{
    UICM_MEAN_WEIGHT, UICM_SPREAD_WEIGHT, UICM_TRIM, UIQM_BLOCK, UIQM_C1, UIQM_C2, UIQM_C3,
    UIQM_SCALE, UISM_CHANNEL_WEIGHTS,
};
use super::RgbPlanes;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UiqmComponents {
    pub uicm: f64,
    pub uism: f64,
    pub uiconm: f64,
}

impl UiqmComponents {
    pub fn total(&self) -> f64 {
        UIQM_C1 * self.uicm + UIQM_C2 * self.uism + UIQM_C3 * self.uiconm
    }
}

struct Scaled {
    h: usize,
    w: usize,
    planes: [Vec<f64>; 3],
}

fn scaled(image: &Tensor) -> Result<Scaled> {
    let p = RgbPlanes::new(image)?;
    if p.height < UIQM_BLOCK || p.width < UIQM_BLOCK {
        return Err(Error::InvalidArgument(format!(
            "uiqm: image {}x{} is smaller than one {UIQM_BLOCK}x{UIQM_BLOCK} block",
            p.height, p.width
        )));
    }
    let s = |c: &[f32]| c.iter().map(|&v| v as f64 * UIQM_SCALE).collect::<Vec<_>>();
    Ok(Scaled {
        h: p.height,
        w: p.width,
        planes: [s(p.r), s(p.g), s(p.b)],
    })
}

/// Asymmetric alpha-trimmed mean (equal trim at both tails) and the spread
/// about it over all samples.
fn trimmed_stats(mut values: Vec<f64>) -> (f64, f64) {
    let k = values.len();
    values.sort_by(f64::total_cmp);
    let lo = (UICM_TRIM * k as f64).ceil() as usize;
    let hi = k - (UICM_TRIM * k as f64).floor() as usize;
    let kept = if lo < hi {
        &values[lo..hi]
    } else {
        &values[..]
    };
    let mean = kept.iter().sum::<f64>() / kept.len() as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k as f64;
    (mean, var)
}

fn uicm_of(s: &Scaled) -> f64 {
    let [r, g, b] = &s.planes;
    let rg: Vec<f64> = r.iter().zip(g).map(|(r, g)| r - g).collect();
    let yb: Vec<f64> = r
        .iter()
        .zip(g)
        .zip(b)
        .map(|((r, g), b)| (r + g) / 2.0 - b)
        .collect();
    let (m_rg, v_rg) = trimmed_stats(rg);
    let (m_yb, v_yb) = trimmed_stats(yb);
    UICM_MEAN_WEIGHT * (m_rg * m_rg + m_yb * m_yb).sqrt()
        + UICM_SPREAD_WEIGHT * (v_rg + v_yb).sqrt()
}

/// Sobel gradient magnitude with symmetric (edge-repeating) borders.
fn sobel_magnitude(x: &[f64], h: usize, w: usize) -> Vec<f64> {
    let at = |r: isize, c: isize| {
        let r = r.clamp(0, h as isize - 1) as usize;
        let c = c.clamp(0, w as isize - 1) as usize;
        x[r * w + c]
    };
    let mut out = vec![0.0; h * w];
    for r in 0..h as isize {
        for c in 0..w as isize {
            let gx = (at(r - 1, c + 1) + 2.0 * at(r, c + 1) + at(r + 1, c + 1))
                - (at(r - 1, c - 1) + 2.0 * at(r, c - 1) + at(r + 1, c - 1));
            let gy = (at(r + 1, c - 1) + 2.0 * at(r + 1, c) + at(r + 1, c + 1))
                - (at(r - 1, c - 1) + 2.0 * at(r - 1, c) + at(r - 1, c + 1));
            out[r as usize * w + c as usize] = gx.hypot(gy);
        }
    }
    out
}

/// Whole `UIQM_BLOCK`-sized blocks; partial blocks at the right and bottom
/// edges are left out.
fn blocks(h: usize, w: usize) -> impl Iterator<Item = (usize, usize)> {
    let (bh, bw) = (h / UIQM_BLOCK, w / UIQM_BLOCK);
    (0..bh).flat_map(move |i| (0..bw).map(move |j| (i * UIQM_BLOCK, j * UIQM_BLOCK)))
}

fn block_extrema<'a>(
    planes: impl Iterator<Item = &'a [f64]> + Clone,
    w: usize,
    top: usize,
    left: usize,
) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in planes {
        for r in top..top + UIQM_BLOCK {
            for &v in &p[r * w + left..r * w + left + UIQM_BLOCK] {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    (lo, hi)
}

/// `EME = 2 / (k1 k2) * sum ln(max / min)`; blocks with a zero extremum
/// contribute nothing.
fn eme(x: &[f64], h: usize, w: usize) -> f64 {
    let count = (h / UIQM_BLOCK) * (w / UIQM_BLOCK);
    let sum: f64 = blocks(h, w)
        .map(|(t, l)| {
            let (lo, hi) = block_extrema(std::iter::once(x), w, t, l);
            if lo > 0.0 && hi > 0.0 {
                (hi / lo).ln()
            } else {
                0.0
            }
        })
        .sum();
    2.0 * sum / count as f64
}

fn uism_of(s: &Scaled) -> f64 {
    s.planes
        .iter()
        .zip(UISM_CHANNEL_WEIGHTS)
        .map(|(c, weight)| {
            let edges: Vec<f64> = sobel_magnitude(c, s.h, s.w)
                .iter()
                .zip(c)
                .map(|(m, v)| m * v)
                .collect();
            weight * eme(&edges, s.h, s.w)
        })
        .sum()
}

/// `AMEE = -1 / (k1 k2) * sum rho ln(rho)`, `rho = (max - min) / (max + min)`
/// taken over each block across all three channels.
fn uiconm_of(s: &Scaled) -> f64 {
    let count = (s.h / UIQM_BLOCK) * (s.w / UIQM_BLOCK);
    let sum: f64 = blocks(s.h, s.w)
        .map(|(t, l)| {
            let (lo, hi) = block_extrema(s.planes.iter().map(Vec::as_slice), s.w, t, l);
            let (spread, level) = (hi - lo, hi + lo);
            if spread != 0.0 && level != 0.0 {
                let rho = spread / level;
                rho * rho.ln()
            } else {
                0.0
            }
        })
        .sum();
    -sum / count as f64
}

pub fn uicm(image: &Tensor) -> Result<f64> {
    Ok(uicm_of(&scaled(image)?))
}

pub fn uism(image: &Tensor) -> Result<f64> {
    Ok(uism_of(&scaled(image)?))
}

pub fn uiconm(image: &Tensor) -> Result<f64> {
    Ok(uiconm_of(&scaled(image)?))
}

pub fn uiqm_components(image: &Tensor) -> Result<UiqmComponents> {
    let s = scaled(image)?;
    Ok(UiqmComponents {
        uicm: uicm_of(&s),
        uism: uism_of(&s),
        uiconm: uiconm_of(&s),
    })
}

/// `0.0282 UICM + 0.2953 UISM + 3.5753 UIConM`.
pub fn uiqm(image: &Tensor) -> Result<f64> {
    Ok(uiqm_components(image)?.total())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn random(h: usize, w: usize, seed: u64) -> Tensor {
        let mut rng = Rng::new(seed);
        Tensor::from_fn(&[3, h, w], |_| rng.next_f32())
    }

    #[test]
    fn constant_gray_scores_zero() {
        for level in [0.0, 0.5, 1.0] {
            let c = uiqm_components(&Tensor::full(&[3, 16, 24], level)).unwrap();
            assert_eq!((c.uicm, c.uism, c.uiconm), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn trimmed_mean_drops_the_tails() {
        let mut v: Vec<f64> = (0..10).map(f64::from).collect();
        v[9] = 1e6;
        let (mean, _) = trimmed_stats(v);
        assert_eq!(mean, (1..9).sum::<i32>() as f64 / 8.0);
    }

    #[test]
    fn sobel_of_a_ramp() {
        let x: Vec<f64> = (0..25).map(|i| (i % 5) as f64).collect();
        let m = sobel_magnitude(&x, 5, 5);
        assert_eq!(m[2 * 5 + 2], 8.0);
        // repeated border halves the central difference
        assert_eq!(m[2 * 5], 4.0);
    }

    #[test]
    fn flip_invariant() {
        let a = random(16, 24, 3);
        let mut flipped = a.clone();
        let (h, w) = (16, 24);
        for c in 0..3 {
            for r in 0..h {
                for col in 0..w {
                    flipped.data_mut()[(c * h + r) * w + col] =
                        a.data()[(c * h + r) * w + w - 1 - col];
                }
            }
        }
        assert!((uiqm(&a).unwrap() - uiqm(&flipped).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn rejects_tiny_and_non_rgb() {
        assert!(uiqm(&Tensor::zeros(&[3, 4, 40])).is_err());
        assert!(uiqm(&Tensor::zeros(&[1, 16, 16])).is_err());
    }
}
