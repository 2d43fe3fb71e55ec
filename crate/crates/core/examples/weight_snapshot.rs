// Save the constructed weights to the flat binary snapshot format and load
// them back bit for bit.

use adavboost::model::{build_model, snapshot, ModelConfig};

pub fn run_example() -> adavboost::Result<()> {
    let config = ModelConfig {
        seed: 3,
        ..ModelConfig::default()
    };
    let weights = build_model(&config)?;
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("toy.avbw");
    snapshot::save(&path, &config, &weights)?;
    let bytes = std::fs::metadata(&path)?.len();

    let (config2, weights2) = snapshot::load(&path)?;
    assert_eq!(config2, config);
    assert_eq!(weights2, weights);
    println!("{} bytes, {} layers, round trip exact", bytes, weights2.layers.len());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
