// Score-row modulation on a hand-made row: visual keys are multiplied by the
// boost factor, text keys in the suppression scope are divided, and only
// layers inside `[layer_start, layer_end)` are touched.

use adavboost::intervention::{apply, InterventionConfig, ScoreRow, SuppressionScope};
use adavboost::model::{Segment, SegmentMap};
use adavboost::tensor::softmax;

fn mass(row: &ScoreRow, seg: &SegmentMap, which: Segment) -> f64 {
    let w = softmax(&row.scores).unwrap();
    w.values()
        .iter()
        .zip(seg.labels())
        .filter(|(_, s)| **s == which)
        .map(|(x, _)| x)
        .sum()
}

pub fn run_example() -> adavboost::Result<()> {
    // 3 visual slots, 1 system token, 2 input tokens, 1 generated token.
    let mut seg = SegmentMap::for_prompt(3, 1, 2);
    seg.push_generated();
    let row = ScoreRow {
        layer: 1,
        scores: vec![1.0, 0.5, 0.8, 1.2, 2.0, 1.8, 0.4],
    };
    let cfg = InterventionConfig {
        alpha: 0.5,
        gamma: 0.5,
        m_vis_max: 2.0,
        m_txt_max: 1.7,
        layer_start: 0,
        layer_end: 2,
        scope: SuppressionScope::TextInputOnly,
    };

    println!("m     visual mass  input mass");
    let mut last = 0.0;
    for m in [1.0, 1.25, 1.5, 2.0] {
        let out = apply(&row, &seg, &cfg, m);
        let v = mass(&out, &seg, Segment::Visual);
        println!("{m:<5} {v:.4}       {:.4}", mass(&out, &seg, Segment::TextInput));
        assert!(v >= last);
        last = v;
    }

    let outside = ScoreRow { layer: 3, ..row.clone() };
    assert_eq!(apply(&outside, &seg, &cfg, 2.0), outside);
    println!("layer 3 is outside [0, 2): row unchanged");
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
