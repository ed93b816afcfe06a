//! Enhance one image with seeded weights, through the library API.
//!
//! ```text
//! cargo run --release --example enhance                       # synthetic 120x90 scene
//! cargo run --release --example enhance -- in.png out.png     # your own image
//! ```
//!
//! Untrained weights only show the data path; the output is not an
//! improvement.

use std::path::PathBuf;
use std::time::Instant;

use watermamba::image_io::{read_image, with_size_policy, write_image, SizePolicy};
use watermamba::network::{init_weights, Model, ModelConfig, SPATIAL_MULTIPLE};
use watermamba::Tensor;

/// Blue-green cast with depth-dependent attenuation of red.
fn synthetic_scene(h: usize, w: usize) -> Tensor {
    Tensor::from_fn(&[1, 3, h, w], |i| {
        let (c, p) = (i / (h * w), i % (h * w));
        let (y, x) = ((p / w) as f32 / h as f32, (p % w) as f32 / w as f32);
        let texture = 0.5 + 0.5 * (12.0 * x).sin() * (9.0 * y).cos();
        match c {
            0 => 0.15 * texture * (1.0 - y),
            1 => 0.35 + 0.3 * texture,
            _ => 0.45 + 0.25 * texture,
        }
    })
}

fn main() -> watermamba::Result<()> {
    let args: Vec<PathBuf> = std::env::args().skip(1).map(PathBuf::from).collect();
    let image = match args.first() {
        Some(path) => read_image(path)?,
        None => synthetic_scene(90, 120),
    };
    let out = args
        .get(1)
        .cloned()
        .unwrap_or_else(|| std::env::temp_dir().join("watermamba-enhanced.png"));

    let model = Model::from_store(&init_weights(&ModelConfig::default(), 0)?)?;
    let start = Instant::now();
    let enhanced = with_size_policy(&image, SizePolicy::Pad8, SPATIAL_MULTIPLE, |x| {
        model.forward(x)
    })?;
    println!(
        "{:?} -> {:?} in {:.2} s (reflect-padded to a multiple of {SPATIAL_MULTIPLE})",
        image.shape(),
        enhanced.shape(),
        start.elapsed().as_secs_f64()
    );
    let clamped = enhanced.map(|v| v.clamp(0.0, 1.0));
    write_image(&out, &clamped)?;
    println!("wrote {}", out.display());
    Ok(())
}
