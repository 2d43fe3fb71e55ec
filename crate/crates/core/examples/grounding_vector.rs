// The grounding vector is computed once at prefill: for each vocabulary id,
// the largest probability any visual position assigns to it. Concepts that
// are in the image score near 1, everything else near 0.

use adavboost::model::{build_model, encode_image, prefill, ModelConfig, SyntheticImage};
use adavboost::risk::grounding_vector;

pub fn run_example() -> adavboost::Result<()> {
    let config = ModelConfig::default();
    let weights = build_model(&config)?;
    let image = SyntheticImage::new([17, 22, 29], &config)?;
    let visual = encode_image(&image, &weights, &config)?;
    let pf = prefill(
        &weights,
        &config,
        &visual,
        &config.vocab.system_prompt,
        &config.vocab.input_prompt,
    )?;
    let g = grounding_vector(&pf.visual_logits)?;

    for id in config.vocab.concepts() {
        let tag = if image.contains(id) { "grounded" } else { "" };
        println!("concept {id:>2}  G = {:.4}  {tag}", g.get(id));
    }
    let min_grounded = image.grounded().iter().map(|&c| g.get(c)).fold(1.0, f64::min);
    let max_other = config
        .vocab
        .concepts()
        .filter(|c| !image.contains(*c))
        .map(|c| g.get(c))
        .fold(0.0, f64::max);
    assert!(min_grounded > max_other);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
