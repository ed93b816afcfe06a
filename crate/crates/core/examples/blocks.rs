//! The SCOSS block and its three sub-blocks on a random feature map.
//!
//! ```text
//! cargo run --example blocks                 # 16 channels, 32x32
//! cargo run --example blocks -- 32 64 48     # channels, height, width
//! ```

use watermamba::blocks::{
    ccoss_forward, msffn_forward, scoss_forward, soss_forward, BlockConfig, ScossWeights,
};
use watermamba::census::{FlopReport, FlopScope};
use watermamba::nn::params::Initializer;
use watermamba::nn::Params;
use watermamba::rng::Rng;
use watermamba::Tensor;

fn rms(t: &Tensor) -> f64 {
    (t.data().iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / t.numel() as f64).sqrt()
}

fn main() -> watermamba::Result<()> {
    let args: Vec<usize> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("numeric argument"))
        .collect();
    let c = args.first().copied().unwrap_or(16);
    let h = args.get(1).copied().unwrap_or(32);
    let w = args.get(2).copied().unwrap_or(h);

    let cfg = BlockConfig::default();
    let mut init = Initializer::new(7);
    let block = ScossWeights::build(&mut Params::new(&mut init), "block", c, &cfg)?;
    let mut rng = Rng::new(3);
    let x = Tensor::from_fn(&[1, c, h, w], |_| rng.normal());

    let soss = block.soss.as_ref().expect("enabled by default");
    let ccoss = block.ccoss.as_ref().expect("enabled by default");
    let msffn = block.msffn.as_ref().expect("enabled by default");
    let s = soss_forward(&x, soss)?;
    let a = ccoss_forward(&s, ccoss)?;
    let f = msffn_forward(&a, msffn)?;
    let y = scoss_forward(&x, &block)?;
    println!("input  {:?}  rms {:.4}", x.shape(), rms(&x));
    println!("soss   rms {:.4}", rms(&s));
    println!("ccoss  rms {:.4}", rms(&a));
    println!("msffn  rms {:.4}  (residual branch)", rms(&f));
    println!("scoss  {:?}  rms {:.4}", y.shape(), rms(&y));

    let mut report = FlopReport {
        params: ScossWeights::param_count(c, &cfg),
        height: h,
        width: w,
        ..Default::default()
    };
    ScossWeights::count_macs(&mut FlopScope::new(&mut report), c, &cfg, h, w);
    print!("{report}");
    Ok(())
}
