//! Weight files: seeded init, save/load round trip, and corruption detection.
//!
//! ```text
//! cargo run --example weights
//! ```

use watermamba::network::{init_weights, param_schema, ModelConfig, WeightStore};
use watermamba::{Error, FormatError};

fn main() -> watermamba::Result<()> {
    let config = ModelConfig::default();
    let store = init_weights(&config, 42)?;
    let bytes = store.to_bytes();
    println!(
        "{} tensors, {} bytes, config:\n{}",
        store.tensors.len(),
        bytes.len(),
        config.to_toml()
    );
    for info in param_schema(&config)?.iter().take(6) {
        println!("  {:<32} {:?}", info.name, info.shape);
    }
    println!("  ...");

    let loaded = WeightStore::from_bytes(&bytes)?;
    println!("round trip identical: {}", loaded.to_bytes() == bytes);
    println!(
        "same seed, same bytes: {}",
        init_weights(&config, 42)?.to_bytes() == bytes
    );

    let mut corrupt = bytes.clone();
    let mid = corrupt.len() / 2;
    corrupt[mid] ^= 1;
    match WeightStore::from_bytes(&corrupt) {
        Err(Error::Format(FormatError::Checksum { stored, computed })) => {
            println!("flipped one bit: checksum {stored:#010x} != {computed:#010x}")
        }
        other => println!("unexpected: {other:?}"),
    }
    match WeightStore::from_bytes(&bytes[..bytes.len() - 9]) {
        Err(e) => println!("truncated file: {e}"),
        Ok(_) => println!("truncated file loaded?"),
    }
    Ok(())
}
