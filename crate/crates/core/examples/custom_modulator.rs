// Any closure over `(layer, head, scores, segments)` is a score modulator.
// `observe` sees the post-softmax weights, which is handy for measuring how
// much attention lands on the image.

use adavboost::model::{
    build_model, decode_step, encode_image, prefill, ModelConfig, ScoreModulator, Segment,
    SegmentMap, SyntheticImage,
};

struct VisualMass<F> {
    inner: F,
    visual: usize,
    total: f64,
    rows: usize,
}

impl<F: FnMut(usize, usize, &mut [f64], &SegmentMap)> ScoreModulator for VisualMass<F> {
    fn modulate(&mut self, layer: usize, head: usize, scores: &mut [f64], seg: &SegmentMap) {
        (self.inner)(layer, head, scores, seg);
    }

    fn observe(&mut self, _layer: usize, _head: usize, weights: &[f64]) {
        self.total += weights[..self.visual].iter().sum::<f64>();
        self.rows += 1;
    }
}

pub fn run_example() -> adavboost::Result<()> {
    let config = ModelConfig::default();
    let weights = build_model(&config)?;
    let image = SyntheticImage::new([20, 26], &config)?;
    let visual = encode_image(&image, &weights, &config)?;
    let vocab = &config.vocab;
    let pf = prefill(&weights, &config, &visual, &vocab.system_prompt, &vocab.input_prompt)?;

    for factor in [1.0, 1.5, 2.0] {
        let mut state = pf.state.clone();
        let boost = move |_: usize, _: usize, s: &mut [f64], seg: &SegmentMap| {
            for (x, l) in s.iter_mut().zip(seg.labels()) {
                if *l == Segment::Visual {
                    *x *= factor;
                }
            }
        };
        let mut m = VisualMass {
            inner: boost,
            visual: config.n_visual_tokens,
            total: 0.0,
            rows: 0,
        };
        let step = decode_step(&mut state, &weights, &config, &mut m)?;
        println!(
            "boost {factor}: mean visual attention {:.3}, next token {}",
            m.total / m.rows as f64,
            step.probs.argmax()
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
