// Build the toy decoder, describe one synthetic image with and without
// AdaVBoost, and mark which generated concepts are hallucinated.
//
// ```bash
// cargo run --example quickstart
// ```

use adavboost::generation::{generate, GenerationRequest, Mode};
use adavboost::intervention::InterventionConfig;
use adavboost::model::{build_model, ModelConfig, SyntheticImage};
use adavboost::testbed::is_hallucinated;

pub fn run_example() -> adavboost::Result<()> {
    let config = ModelConfig::default();
    let weights = build_model(&config)?;
    let image = SyntheticImage::new([18, 27, 30], &config)?;

    let modes = [
        Mode::Vanilla,
        Mode::AdaVBoost(InterventionConfig::llava_style(config.n_layers)),
    ];
    for mode in modes {
        let request = GenerationRequest::new(image.clone(), &config, mode.clone(), 8);
        let out = generate(&request, &weights, &config)?;
        let marked: Vec<String> = out
            .tokens
            .iter()
            .map(|&t| {
                if is_hallucinated(t, &image, &config.vocab) {
                    format!("{t}*")
                } else {
                    t.to_string()
                }
            })
            .collect();
        println!("{:>10}: {}", mode.label(), marked.join(" "));
        assert_eq!(out.tokens.len(), 8);
    }
    println!("(* = concept not in the image {:?})", image.grounded());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
