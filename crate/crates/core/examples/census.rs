//! Parameter and MAC census of a model configuration.
//!
//! ```text
//! cargo run --example census                 # default config at 256x256
//! cargo run --example census -- 512 512      # other resolution
//! cargo run --example census -- 256 256 8    # widths [c, 2c, 4c, 8c]
//! ```

use watermamba::network::{count_flops, ModelConfig};

fn main() -> watermamba::Result<()> {
    let args: Vec<usize> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("numeric argument"))
        .collect();
    let h = args.first().copied().unwrap_or(256);
    let w = args.get(1).copied().unwrap_or(h);
    let config = match args.get(2) {
        Some(&c) => ModelConfig::doubling(c),
        None => ModelConfig::default(),
    };
    println!("widths {:?}, state {}", config.widths, config.state);
    let report = count_flops(&config, h, w)?;
    print!("{report}");

    for (name, cfg) in [
        (
            "w/o soss",
            ModelConfig {
                use_soss: false,
                ..config.clone()
            },
        ),
        (
            "w/o ccoss",
            ModelConfig {
                use_ccoss: false,
                ..config.clone()
            },
        ),
        (
            "w/o msffn",
            ModelConfig {
                use_msffn: false,
                ..config.clone()
            },
        ),
    ] {
        let r = count_flops(&cfg, h, w)?;
        println!(
            "{name:<10} params {:>9}  MACs {:.3} G",
            r.params,
            r.total_macs() as f64 / 1e9
        );
    }
    Ok(())
}
