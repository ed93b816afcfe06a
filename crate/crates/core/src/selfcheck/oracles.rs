//! Brute-force metric implementations written directly from the published
//! definitions, kept deliberately separate from `crate::metrics` so the two
//! can be checked against each other.

use crate::tensor::Tensor;

fn px(img: &Tensor, c: usize, r: usize, col: usize) -> f64 {
    let s = img.shape();
    let (h, w) = (s[s.len() - 2], s[s.len() - 1]);
    img.data()[(c * h + r) * w + col] as f64
}

fn dims(img: &Tensor) -> (usize, usize) {
    let s = img.shape();
    (s[s.len() - 2], s[s.len() - 1])
}

fn trimmed_mean_and_var(values: &[f64]) -> (f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = sorted.len() as f64;
    let t_l = (0.1 * k).ceil() as usize;
    let t_r = (0.1 * k).floor() as usize;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, v) in sorted.iter().enumerate() {
        if i >= t_l && i < sorted.len() - t_r {
            sum += v;
            count += 1;
        }
    }
    let mu = if count == 0 {
        values.iter().sum::<f64>() / k
    } else {
        sum / count as f64
    };
    let mut var = 0.0;
    for v in values {
        var += (v - mu) * (v - mu);
    }
    (mu, var / k)
}

pub fn uicm(img: &Tensor) -> f64 {
    let (h, w) = dims(img);
    let mut rg = Vec::new();
    let mut yb = Vec::new();
    for r in 0..h {
        for c in 0..w {
            let (red, green, blue) = (
                255.0 * px(img, 0, r, c),
                255.0 * px(img, 1, r, c),
                255.0 * px(img, 2, r, c),
            );
            rg.push(red - green);
            yb.push(0.5 * (red + green) - blue);
        }
    }
    let (mu_rg, var_rg) = trimmed_mean_and_var(&rg);
    let (mu_yb, var_yb) = trimmed_mean_and_var(&yb);
    -0.0268 * (mu_rg.powi(2) + mu_yb.powi(2)).sqrt() + 0.1586 * (var_rg + var_yb).sqrt()
}

/// Channel `c` on the 0..255 scale, padded by one repeated sample per side.
fn padded(img: &Tensor, c: usize) -> Vec<Vec<f64>> {
    let (h, w) = dims(img);
    let mut grid = vec![vec![0.0; w + 2]; h + 2];
    for (r, line) in grid.iter_mut().enumerate() {
        for (col, v) in line.iter_mut().enumerate() {
            let rr = (r as isize - 1).clamp(0, h as isize - 1) as usize;
            let cc = (col as isize - 1).clamp(0, w as isize - 1) as usize;
            *v = 255.0 * px(img, c, rr, cc);
        }
    }
    grid
}

fn eme_blocks(map: &[Vec<f64>], h: usize, w: usize) -> f64 {
    let (k1, k2) = (w / 8, h / 8);
    let mut total = 0.0;
    for by in 0..k2 {
        for bx in 0..k1 {
            let mut mx = f64::MIN;
            let mut mn = f64::MAX;
            for r in by * 8..by * 8 + 8 {
                for c in bx * 8..bx * 8 + 8 {
                    mx = mx.max(map[r][c]);
                    mn = mn.min(map[r][c]);
                }
            }
            if mn != 0.0 && mx != 0.0 {
                total += (mx / mn).ln();
            }
        }
    }
    2.0 / (k1 * k2) as f64 * total
}

pub fn uism(img: &Tensor) -> f64 {
    const KX: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
    const KY: [[f64; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];
    let (h, w) = dims(img);
    let lambda = [0.299, 0.587, 0.114];
    let mut total = 0.0;
    for (c, weight) in lambda.iter().enumerate() {
        let grid = padded(img, c);
        let mut edge = vec![vec![0.0; w]; h];
        for r in 0..h {
            for col in 0..w {
                let (mut gx, mut gy) = (0.0, 0.0);
                for i in 0..3 {
                    for j in 0..3 {
                        gx += KX[i][j] * grid[r + i][col + j];
                        gy += KY[i][j] * grid[r + i][col + j];
                    }
                }
                edge[r][col] = (gx * gx + gy * gy).sqrt() * grid[r + 1][col + 1];
            }
        }
        total += weight * eme_blocks(&edge, h, w);
    }
    total
}

pub fn uiconm(img: &Tensor) -> f64 {
    let (h, w) = dims(img);
    let (k1, k2) = (w / 8, h / 8);
    let mut total = 0.0;
    for by in 0..k2 {
        for bx in 0..k1 {
            let mut mx = f64::MIN;
            let mut mn = f64::MAX;
            for c in 0..3 {
                for r in by * 8..by * 8 + 8 {
                    for col in bx * 8..bx * 8 + 8 {
                        let v = 255.0 * px(img, c, r, col);
                        mx = mx.max(v);
                        mn = mn.min(v);
                    }
                }
            }
            let (top, bot) = (mx - mn, mx + mn);
            if top != 0.0 && bot != 0.0 {
                total += (top / bot) * (top / bot).ln();
            }
        }
    }
    -total / (k1 * k2) as f64
}

pub fn uiqm(img: &Tensor) -> f64 {
    0.0282 * uicm(img) + 0.2953 * uism(img) + 3.5753 * uiconm(img)
}

fn lab(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let lin = |v: f64| {
        if v > 0.04045 {
            ((v + 0.055) / 1.055).powf(2.4)
        } else {
            v / 12.92
        }
    };
    let (r, g, b) = (lin(r), lin(g), lin(b));
    let x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    let y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    let z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
    let (xn, yn, zn) = (
        0.4124564 + 0.3575761 + 0.1804375,
        0.2126729 + 0.7151522 + 0.0721750,
        0.0193339 + 0.1191920 + 0.9503041,
    );
    let f = |t: f64| {
        let delta: f64 = 6.0 / 29.0;
        if t > delta.powi(3) {
            t.powf(1.0 / 3.0)
        } else {
            t / (3.0 * delta * delta) + 4.0 / 29.0
        }
    };
    let (fx, fy, fz) = (f(x / xn), f(y / yn), f(z / zn));
    (116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz))
}

fn percentile(values: &[f64], q: f64) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = q * (s.len() as f64 - 1.0);
    let i = rank as usize;
    if i + 1 >= s.len() {
        return s[s.len() - 1];
    }
    let frac = rank - i as f64;
    s[i] * (1.0 - frac) + s[i + 1] * frac
}

pub fn uciqe(img: &Tensor) -> f64 {
    let (h, w) = dims(img);
    let mut lights = Vec::new();
    let mut chromas = Vec::new();
    let mut sats = Vec::new();
    for r in 0..h {
        for c in 0..w {
            let (l, a, b) = lab(px(img, 0, r, c), px(img, 1, r, c), px(img, 2, r, c));
            let (l, a, b) = (l / 100.0, a / 100.0, b / 100.0);
            let chroma = (a * a + b * b).sqrt();
            lights.push(l);
            chromas.push(chroma);
            sats.push(if l == 0.0 { 0.0 } else { chroma / l });
        }
    }
    let n = chromas.len() as f64;
    let mean = chromas.iter().sum::<f64>() / n;
    let sigma = (chromas.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / n).sqrt();
    let contrast = percentile(&lights, 0.99) - percentile(&lights, 0.01);
    let mu_s = sats.iter().sum::<f64>() / n;
    0.4680 * sigma + 0.2745 * contrast + 0.2576 * mu_s
}
