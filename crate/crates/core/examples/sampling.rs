// Greedy decoding against temperature sampling. A sampling seed pins the
// whole token stream, so reruns are identical.

use adavboost::generation::{generate, Decoding, GenerationRequest, Mode};
use adavboost::model::{build_model, ModelConfig, SyntheticImage};

pub fn run_example() -> adavboost::Result<()> {
    let config = ModelConfig::default();
    let weights = build_model(&config)?;
    let image = SyntheticImage::new([19, 23, 28, 30], &config)?;

    let mut request = GenerationRequest::new(image, &config, Mode::Vanilla, 10);
    let greedy = generate(&request, &weights, &config)?.tokens;
    println!("greedy        {greedy:?}");

    for seed in [1, 2] {
        request.decoding = Decoding::Sample {
            seed,
            temperature: 0.8,
        };
        let a = generate(&request, &weights, &config)?.tokens;
        let b = generate(&request, &weights, &config)?.tokens;
        assert_eq!(a, b);
        println!("seed {seed}, T=0.8 {a:?}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
