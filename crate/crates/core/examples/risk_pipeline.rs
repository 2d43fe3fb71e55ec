// From one next-token distribution to a boost factor: normalized entropy,
// grounding score, VGE, clipped risk and the visual multiplier the next step
// will use.

use adavboost::risk::{
    boost_strength, grounding_vector, normalized_entropy, readout, risk_score, vge, RiskParams,
};
use adavboost::tensor::softmax;

pub fn run_example() -> adavboost::Result<()> {
    // Two visual positions over a 4-token vocabulary.
    let g = grounding_vector(&[vec![3.0, 0.0, 0.0, 0.0], vec![0.0, 2.5, 0.0, 0.0]])?;
    println!("G = {:?}", g.values());

    let params = RiskParams {
        alpha: 0.5,
        gamma: 0.5,
        m_vis_max: 1.3,
    };
    let cases = [
        ("confident, grounded", vec![4.0, 0.0, 0.0, 0.0]),
        ("confident, ungrounded", vec![0.0, 0.0, 4.0, 0.0]),
        ("uncertain", vec![0.2, 0.1, 0.3, 0.0]),
    ];
    for (name, logits) in cases {
        let p = softmax(&logits)?;
        let r = readout(&p, &logits, &g, params)?;
        println!(
            "{name:<22} h_bar={:.3} g={:.3} vge={:.3} r={:.3} m={:.3}",
            r.h_bar, r.g_t, r.vge, r.r, r.m
        );
        let h = normalized_entropy(&p)?;
        let s = vge(h, r.g_t, params.alpha);
        let expect = boost_strength(risk_score(s, params.gamma)?, params.m_vis_max);
        assert_eq!(r.m, expect);
    }
    assert_eq!(boost_strength(0.0, 1.3), 1.0);
    assert_eq!(boost_strength(1.0, 1.3), 1.3);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
