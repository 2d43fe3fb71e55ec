// How well entropy alone and VGE rank tokens by hallucination: decile
// buckets, their Spearman correlation with the hallucination count, and the
// grounding gap inside the low-entropy half.

use adavboost::generation::{Mode, DEFAULT_TRACE_RISK};
use adavboost::model::{build_model, ModelConfig};
use adavboost::testbed::{labeled_tokens, low_entropy_vg_gap, quantile_correlation, run_episodes, TestbedConfig};

pub fn run_example() -> adavboost::Result<()> {
    let config = ModelConfig::default();
    let weights = build_model(&config)?;
    let testbed = TestbedConfig {
        episodes: 40,
        ..TestbedConfig::default()
    };
    let episodes = run_episodes(&weights, &config, &testbed, &[Mode::Vanilla], Default::default(), DEFAULT_TRACE_RISK, 4)?;
    let tokens = labeled_tokens(&episodes, "vanilla", &config.vocab)?;
    let q = quantile_correlation(&tokens)?;

    println!("decile   entropy-bucket hallucinations   vge-bucket hallucinations");
    for k in 0..q.entropy.totals.len() {
        println!("{k:>6}   {:>4} / {:<4}                   {:>4} / {:<4}",
            q.entropy.hallucinated[k], q.entropy.totals[k], q.vge.hallucinated[k], q.vge.totals[k]);
    }
    println!("spearman: entropy {:?}, vge {:?}", q.entropy_spearman, q.vge_spearman);

    let gap = low_entropy_vg_gap(&tokens);
    println!(
        "low-entropy region: mean G hallucinated {:?}, normal {:?}, standard error {:?}",
        gap.mean_hallucinated, gap.mean_normal, gap.standard_error
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
