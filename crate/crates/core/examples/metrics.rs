//! Full-reference and no-reference scores of a synthetic image and
//! progressively degraded copies.
//!
//! ```text
//! cargo run --example metrics
//! ```

use watermamba::metrics::{psnr, ssim, uciqe_components, uiqm_components};
use watermamba::rng::Rng;
use watermamba::Tensor;

fn main() -> watermamba::Result<()> {
    let (h, w) = (64, 64);
    let mut rng = Rng::new(5);
    let clean = Tensor::from_fn(&[1, 3, h, w], |i| {
        let p = i % (h * w);
        let (y, x) = (p / w, p % w);
        let stripes = if (x / 8 + y / 8) % 2 == 0 { 0.8 } else { 0.2 };
        (stripes + 0.1 * (i / (h * w)) as f32 + 0.05 * rng.next_f32()).min(1.0)
    });

    println!(
        "{:<18} {:>8} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}",
        "variant", "PSNR", "SSIM", "UIQM", "UICM", "UISM", "UIConM", "UCIQE"
    );
    let casts: [(&str, [f32; 3], f32); 4] = [
        ("clean", [1.0, 1.0, 1.0], 0.0),
        ("mild cast", [0.7, 1.0, 1.05], 0.05),
        ("strong cast", [0.3, 0.9, 1.1], 0.15),
        ("haze", [0.5, 0.8, 0.9], 0.35),
    ];
    for (name, gain, veil) in casts {
        let plane = h * w;
        let degraded = Tensor::from_fn(clean.shape(), |i| {
            let c = i / plane;
            ((1.0 - veil) * gain[c] * clean.data()[i] + veil * [0.1, 0.5, 0.6][c]).clamp(0.0, 1.0)
        });
        let q = uiqm_components(&degraded)?;
        let e = uciqe_components(&degraded)?;
        println!(
            "{name:<18} {:>8.3} {:>7.4} {:>7.4} {:>7.3} {:>7.3} {:>7.4} {:>7.4}",
            psnr(&clean, &degraded, 1.0)?,
            ssim(&clean, &degraded)?,
            q.total(),
            q.uicm,
            q.uism,
            q.uiconm,
            e.total()
        );
    }
    Ok(())
}
