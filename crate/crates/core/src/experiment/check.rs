//! Built-in invariant suites run by `adavboost check`. Each suite draws from
//! a fixed seed, so repeated invocations print the same summary.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::generation::{check_lag_invariant, generate, GenerationRequest, Mode};
use crate::intervention::{boost_visual_in_place, suppress_text_in_place, InterventionConfig, SuppressionScope};
use crate::model::{
    build_model, decode_step, encode_image, full_sequence_logits, prefill, Identity, ModelConfig,
    ModelWeights, Segment, SegmentMap, SyntheticImage, TokenId,
};
use crate::risk::{boost_strength, grounding_vector, normalized_entropy, risk_score, vge};
use crate::tensor::softmax;
use crate::testbed::{episode_seed, sample_episode, TestbedConfig};

pub const SUITES: [&str; 6] = [
    "oracle_arithmetic",
    "endpoint_exactness",
    "vanilla_equivalence",
    "mass_monotonicity",
    "cache_consistency",
    "lag_invariant",
];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CheckOptions {
    /// Corrupts the first recorded boost factor of every trace before the
    /// lag-invariant suite sees it (negative control).
    pub inject_fault: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub suites: Vec<SuiteResult>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| s.passed)
    }

    pub fn failing(&self) -> Vec<&str> {
        self.suites.iter().filter(|s| !s.passed).map(|s| s.name.as_str()).collect()
    }
}

type Outcome = std::result::Result<String, String>;

const TOL: f64 = 1e-12;

fn close(a: f64, b: f64, what: &str) -> std::result::Result<(), String> {
    if (a - b).abs() <= TOL {
        Ok(())
    } else {
        Err(format!("{what}: {a} vs oracle {b}"))
    }
}

fn naive_probs(logits: &[f64]) -> Vec<f64> {
    let mut mx = f64::NEG_INFINITY;
    for &z in logits {
        if z > mx {
            mx = z;
        }
    }
    let mut e = Vec::new();
    let mut total = 0.0;
    for &z in logits {
        let v = (z - mx).exp();
        total += v;
        e.push(v);
    }
    e.into_iter().map(|v| v / total).collect()
}

fn oracle_arithmetic() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let draws = 1000;
    for _ in 0..draws {
        let v = rng.random_range(2..=24);
        let logits: Vec<f64> = (0..v).map(|_| rng.random_range(-8.0..8.0)).collect();
        let p = softmax(&logits).map_err(|e| e.to_string())?;
        let q = naive_probs(&logits);
        let mut h = 0.0;
        for &x in &q {
            if x > 0.0 {
                h -= x * x.ln();
            }
        }
        let h_bar = normalized_entropy(&p).map_err(|e| e.to_string())?;
        close(h_bar, h / (v as f64).ln(), "normalized_entropy")?;

        let (h_in, g_in, alpha) = (rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>());
        let s = vge(h_in, g_in, alpha);
        close(s, alpha * h_in + (1.0 - alpha) * (1.0 - g_in), "vge")?;
        let gamma = rng.random_range(0.05..1.5);
        let r = risk_score(s, gamma).map_err(|e| e.to_string())?;
        let r_oracle = if s / gamma > 1.0 { 1.0 } else { s / gamma };
        close(r, r_oracle, "risk_score")?;
        let m_max = rng.random_range(1.0..3.0);
        close(boost_strength(r, m_max), 1.0 + (m_max - 1.0) * r, "boost_strength")?;

        let n_vis = rng.random_range(1..6);
        let rows: Vec<Vec<f64>> = (0..n_vis)
            .map(|_| (0..v).map(|_| rng.random_range(-6.0..6.0)).collect())
            .collect();
        let g = grounding_vector(&rows).map_err(|e| e.to_string())?;
        let probs: Vec<Vec<f64>> = rows.iter().map(|r| naive_probs(r)).collect();
        for tok in 0..v {
            let mut best = 0.0;
            for row in &probs {
                if row[tok] > best {
                    best = row[tok];
                }
            }
            close(g.get(tok), best, "grounding_vector")?;
        }
    }
    Ok(format!("{draws} draws within {TOL:e}"))
}

fn endpoint_exactness() -> Outcome {
    for m in [1.0, 1.1, 1.3, 1.7, 2.0, 3.5] {
        if boost_strength(0.0, m) != 1.0 || boost_strength(1.0, m) != m {
            return Err(format!("boost endpoints not exact for m_vis_max = {m}"));
        }
    }
    for v in [2, 7, 64] {
        let uniform = softmax(&vec![0.0; v]).map_err(|e| e.to_string())?;
        let h = normalized_entropy(&uniform).map_err(|e| e.to_string())?;
        close(h, 1.0, "uniform entropy")?;
        let mut z = vec![-1e4; v];
        z[0] = 0.0;
        let one_hot = softmax(&z).map_err(|e| e.to_string())?;
        let h = normalized_entropy(&one_hot).map_err(|e| e.to_string())?;
        close(h, 0.0, "one-hot entropy")?;
    }
    Ok("boost and entropy endpoints exact".into())
}

fn random_function_tokens(rng: &mut ChaCha8Rng, config: &ModelConfig, n: usize) -> Vec<TokenId> {
    (0..n)
        .map(|_| loop {
            let t = rng.random_range(1..config.vocab_size);
            if config.vocab.is_function(t) {
                break t;
            }
        })
        .collect()
}

fn random_prompt(rng: &mut ChaCha8Rng, config: &ModelConfig) -> (Vec<TokenId>, Vec<TokenId>) {
    let n_sys = 1 + rng.random_range(0..3);
    let sys = random_function_tokens(rng, config, n_sys);
    let n_in = 1 + rng.random_range(0..4);
    let input = random_function_tokens(rng, config, n_in);
    (sys, input)
}

fn random_image(rng: &mut ChaCha8Rng, config: &ModelConfig) -> Result<SyntheticImage, String> {
    let tb = TestbedConfig::default();
    let (image, _) = sample_episode(episode_seed(rng.random(), 0), config, &tb).map_err(|e| e.to_string())?;
    Ok(image)
}

fn vanilla_equivalence(config: &ModelConfig, weights: &ModelWeights) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let triples = 100;
    let noop = InterventionConfig {
        m_vis_max: 1.0,
        m_txt_max: 1.0,
        scope: SuppressionScope::AllText,
        ..InterventionConfig::llava_style(config.n_layers)
    };
    for k in 0..triples {
        let image = random_image(&mut rng, config)?;
        let (sys, input) = random_prompt(&mut rng, config);
        let run = |mode: Mode| {
            let mut req = GenerationRequest::new(image.clone(), config, mode, 8);
            req.system_tokens = sys.clone();
            req.input_tokens = input.clone();
            generate(&req, weights, config).map(|o| o.tokens).map_err(|e| e.to_string())
        };
        let a = run(Mode::Vanilla)?;
        let b = run(Mode::AdaVBoost(noop.clone()))?;
        if a != b {
            return Err(format!("triple {k}: vanilla {a:?} vs unit-factor adavboost {b:?}"));
        }
    }
    Ok(format!("{triples} triples bit-identical"))
}

fn visual_mass(scores: &[f64], segments: &SegmentMap, pick: impl Fn(Segment) -> bool) -> Result<f64, String> {
    let w = softmax(scores).map_err(|e| e.to_string())?;
    Ok(w.values()
        .iter()
        .zip(segments.labels())
        .filter(|(_, s)| pick(**s))
        .map(|(x, _)| x)
        .sum())
}

fn mass_monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let rows = 1000;
    let factors: Vec<f64> = (0..=10).map(|i| 1.0 + i as f64 / 10.0).collect();
    for k in 0..rows {
        let mut seg = SegmentMap::for_prompt(
            rng.random_range(1..9),
            rng.random_range(0..4),
            rng.random_range(1..5),
        );
        for _ in 0..rng.random_range(0..6) {
            seg.push_generated();
        }
        let scores: Vec<f64> = (0..seg.len()).map(|_| rng.random_range(0.0..4.0)).collect();
        let mut prev = f64::NEG_INFINITY;
        for &m in &factors {
            let mut s = scores.clone();
            boost_visual_in_place(&mut s, &seg, m);
            let mass = visual_mass(&s, &seg, |x| x == Segment::Visual)?;
            if mass < prev {
                return Err(format!("row {k}: visual mass fell from {prev} to {mass} at m = {m}"));
            }
            prev = mass;
        }
        let mut prev = f64::INFINITY;
        for &m in &factors {
            let mut s = scores.clone();
            suppress_text_in_place(&mut s, &seg, m, SuppressionScope::TextInputOnly);
            let mass = visual_mass(&s, &seg, |x| x == Segment::TextInput)?;
            if mass > prev {
                return Err(format!("row {k}: text-input mass rose from {prev} to {mass} at m_txt = {m}"));
            }
            prev = mass;
        }
    }
    Ok(format!("{rows} rows, {} factors, zero violations", factors.len()))
}

fn cache_consistency(config: &ModelConfig, weights: &ModelWeights) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let sequences = 50;
    let len = 32;
    let mut worst: f64 = 0.0;
    for k in 0..sequences {
        let image = random_image(&mut rng, config)?;
        let visual = encode_image(&image, weights, config).map_err(|e| e.to_string())?;
        let vocab = &config.vocab;
        let mut cont = vec![vocab.response_start];
        cont.extend((1..len).map(|_| rng.random_range(0..config.vocab_size)));
        let full = full_sequence_logits(weights, config, &visual, &vocab.system_prompt, &vocab.input_prompt, &cont)
            .map_err(|e| e.to_string())?;
        let mut state = prefill(weights, config, &visual, &vocab.system_prompt, &vocab.input_prompt)
            .map_err(|e| e.to_string())?
            .state;
        for (t, &tok) in cont.iter().enumerate() {
            state.feed(tok);
            let step = decode_step(&mut state, weights, config, &mut Identity).map_err(|e| e.to_string())?;
            for (a, b) in step.logits.iter().zip(&full[t]) {
                worst = worst.max((a - b).abs());
            }
        }
        if worst > 1e-9 {
            return Err(format!("sequence {k}: incremental and full logits differ by {worst:e}"));
        }
    }
    Ok(format!("{sequences} sequences of {len} tokens, max diff {worst:e}"))
}

fn lag_invariant(config: &ModelConfig, weights: &ModelWeights, inject_fault: bool) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let cfg = InterventionConfig {
        m_vis_max: 1.5,
        ..InterventionConfig::llava_style(config.n_layers)
    };
    let traces = 100;
    for k in 0..traces {
        let image = random_image(&mut rng, config)?;
        let req = GenerationRequest::new(image, config, Mode::AdaVBoost(cfg.clone()), 8);
        let mut trace = generate(&req, weights, config).map_err(|e| e.to_string())?.trace;
        if inject_fault {
            trace[0].m = cfg.m_vis_max;
        }
        check_lag_invariant(&trace, cfg.m_vis_max).map_err(|e| format!("trace {k}: {e}"))?;
    }
    Ok(format!("{traces} traces"))
}

/// Runs every suite on the given model config.
pub fn cmd_check(config: &ModelConfig, opts: CheckOptions) -> crate::Result<CheckReport> {
    config.validate()?;
    let weights = build_model(config)?;
    let outcomes: [Outcome; 6] = [
        oracle_arithmetic(),
        endpoint_exactness(),
        vanilla_equivalence(config, &weights),
        mass_monotonicity(),
        cache_consistency(config, &weights),
        lag_invariant(config, &weights, opts.inject_fault),
    ];
    let suites = SUITES
        .iter()
        .zip(outcomes)
        .map(|(name, o)| {
            let (passed, detail) = match o {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            SuiteResult {
                name: name.to_string(),
                passed,
                detail,
            }
        })
        .collect();
    Ok(CheckReport { suites })
}
