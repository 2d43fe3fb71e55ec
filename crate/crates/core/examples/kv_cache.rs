// Incremental decoding over the KV cache against a full recompute of the
// whole sequence at every step.

use adavboost::model::{
    build_model, decode_step, encode_image, full_sequence_logits, prefill, Identity, ModelConfig,
    SyntheticImage,
};

pub fn run_example() -> adavboost::Result<()> {
    let config = ModelConfig::default();
    let weights = build_model(&config)?;
    let image = SyntheticImage::new([16, 25], &config)?;
    let visual = encode_image(&image, &weights, &config)?;
    let vocab = &config.vocab;
    let continuation = [vocab.response_start, 25, 16, 20, 3, 31, 25];

    let full = full_sequence_logits(
        &weights,
        &config,
        &visual,
        &vocab.system_prompt,
        &vocab.input_prompt,
        &continuation,
    )?;
    let mut state = prefill(&weights, &config, &visual, &vocab.system_prompt, &vocab.input_prompt)?.state;
    let mut worst: f64 = 0.0;
    for (t, &tok) in continuation.iter().enumerate() {
        state.feed(tok);
        let step = decode_step(&mut state, &weights, &config, &mut Identity)?;
        let diff = step
            .logits
            .iter()
            .zip(&full[t])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(diff);
    }
    println!("cache length {} positions, max |incremental - full| = {worst:e}", state.len());
    assert!(worst <= 1e-9);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
