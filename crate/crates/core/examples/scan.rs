//! The three selective-scan kernels on one random problem.
//!
//! ```text
//! cargo run --example scan                # L = 4096, N = 16
//! cargo run --example scan -- 65536 32    # longer sequence, wider state
//! ```

use std::time::Instant;

use watermamba::rng::Rng;
use watermamba::ssm::{
    discretize, selective_scan_assoc, selective_scan_fast, selective_scan_ref, BbarRule, ScanInput,
    SsmParams, DEFAULT_CHUNK,
};
use watermamba::Tensor;

fn main() -> watermamba::Result<()> {
    let args: Vec<usize> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("numeric argument"))
        .collect();
    let len = args.first().copied().unwrap_or(4096);
    let state = args.get(1).copied().unwrap_or(16);
    let channels = 8;

    // one ZOH step by hand: delta = 0.1, a = -1, b = 2
    let (a_bar, b_bar) = discretize(0.1, -1.0, 2.0)?;
    println!("discretize(0.1, -1, 2) = ({a_bar:.6}, {b_bar:.6})");

    let mut rng = Rng::new(1);
    let u: Vec<f32> = (0..channels * len).map(|_| rng.normal()).collect();
    let delta: Vec<f32> = (0..channels * len)
        .map(|_| 10f32.powf(rng.uniform(-3.0, 0.0)))
        .collect();
    let b: Vec<f32> = (0..state * len).map(|_| rng.normal()).collect();
    let c: Vec<f32> = (0..state * len).map(|_| rng.normal()).collect();
    let params = SsmParams::new(
        Tensor::from_fn(&[channels, state], |i| ((i % state + 1) as f32).ln()),
        Tensor::full(&[channels], 1.0),
        BbarRule::Zoh,
    )?;
    let input = ScanInput::new((1, channels, state, len), &u, &delta, &b, &c)?;

    let timed = |name: &str, f: &dyn Fn() -> watermamba::Result<Vec<f32>>| {
        let start = Instant::now();
        let y = f();
        println!("{name:<12} {:8.3} ms", start.elapsed().as_secs_f64() * 1e3);
        y
    };
    let reference = timed("reference", &|| selective_scan_ref(&input, &params))?;
    let fast = timed("fast", &|| selective_scan_fast(&input, &params))?;
    let assoc = timed("associative", &|| {
        selective_scan_assoc(&input, &params, DEFAULT_CHUNK)
    })?;

    let max_diff = |a: &[f32]| {
        a.iter()
            .zip(&reference)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0f32, f32::max)
    };
    println!("fast == reference bit-for-bit: {}", fast == reference);
    println!("associative max |diff|: {:.3e}", max_diff(&assoc));
    Ok(())
}
