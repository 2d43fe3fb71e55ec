// A fixed visual boost resolves some hallucinations, leaves others, and
// introduces new ones at positions where vanilla decoding was clean.
// Counts are position-aligned against the vanilla output.

use adavboost::generation::{Mode, DEFAULT_TRACE_RISK};
use adavboost::model::{build_model, ModelConfig};
use adavboost::testbed::{hallucination_metrics, run_episodes, TestbedConfig};

pub fn run_example() -> adavboost::Result<()> {
    let config = ModelConfig::default();
    let weights = build_model(&config)?;
    let testbed = TestbedConfig {
        episodes: 60,
        ..TestbedConfig::default()
    };
    let modes = [Mode::Vanilla, Mode::FixedBoost { factor: 1.2 }];
    let episodes = run_episodes(&weights, &config, &testbed, &modes, Default::default(), DEFAULT_TRACE_RISK, 4)?;
    let report = hallucination_metrics(&episodes, "vanilla", &config.vocab)?;

    for (label, stats) in &report.modes {
        println!("{label:<16} hallucination rate {:.3}", stats.hallucination_rate);
    }
    let c = report.versus_baseline["fixed_boost_1.2"];
    println!(
        "fixed boost vs vanilla: resolved {}, remaining {}, newly introduced {}",
        c.resolved, c.remaining, c.newly_introduced
    );
    assert_eq!(c.resolved + c.remaining, report.modes["vanilla"].hallucinated);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
