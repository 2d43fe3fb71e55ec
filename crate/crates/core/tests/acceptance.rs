//! The eleven acceptance criteria, run in order with one PASS/FAIL line each.
//! Oracles here are written out longhand and never call back into the
//! library's own helpers for the quantity under test.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use adavboost::experiment::{cmd_compare, RunConfig};
use adavboost::generation::{generate, GenerationRequest, Mode, DEFAULT_TRACE_RISK};
use adavboost::intervention::{apply, InterventionConfig, ScoreRow, SuppressionScope};
use adavboost::model::{
    build_model, decode_step, encode_image, full_sequence_logits, prefill, Identity, ModelConfig,
    ModelWeights, Segment, SegmentMap, SyntheticImage, TokenId,
};
use adavboost::risk::{boost_strength, grounding_vector, normalized_entropy, risk_score, vge};
use adavboost::tensor::{softmax, ProbVector};
use adavboost::testbed::{
    episode_rate, hallucination_metrics, labeled_tokens, low_entropy_vg_gap,
    quantile_correlation, run_episodes, sample_episode, Episode, TestbedConfig,
};

type Outcome = Result<String, String>;

fn oracle_softmax(z: &[f64]) -> Vec<f64> {
    let mx = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|x| (x - mx).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

fn oracle_entropy(p: &[f64]) -> f64 {
    let mut h = 0.0;
    for &x in p {
        if x > 0.0 {
            h -= x * x.ln();
        }
    }
    h / (p.len() as f64).ln()
}

fn within(a: f64, b: f64, tol: f64, what: &str) -> Result<(), String> {
    if (a - b).abs() <= tol {
        Ok(())
    } else {
        Err(format!("{what}: got {a}, oracle {b}"))
    }
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let t = Instant::now();
    let detail = f()?;
    let took = t.elapsed();
    if took > limit {
        return Err(format!("{detail}; took {took:.2?}, limit {limit:?}"));
    }
    Ok(format!("{detail}; {took:.2?}"))
}

fn c1_oracle_arithmetic() -> Outcome {
    timed(Duration::from_secs(5), || {
        let mut rng = ChaCha8Rng::seed_from_u64(0xA1);
        let n = 10_000;
        for _ in 0..n {
            let v: usize = rng.random_range(2..=40);
            let z: Vec<f64> = (0..v).map(|_| rng.random_range(-10.0..10.0)).collect();
            let p = softmax(&z).map_err(|e| e.to_string())?;
            within(normalized_entropy(&p).unwrap(), oracle_entropy(&oracle_softmax(&z)), 1e-12, "entropy")?;

            let (h, g, a) = (rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>());
            let s = vge(h, g, a);
            within(s, a * h + (1.0 - a) * (1.0 - g), 1e-12, "vge")?;
            let gamma = rng.random_range(0.01..2.0);
            let r = risk_score(s, gamma).unwrap();
            let r_oracle = if s >= gamma { 1.0 } else { s / gamma };
            within(r, r_oracle, 1e-12, "risk_score")?;
            let mmax = rng.random_range(1.0..4.0);
            within(boost_strength(r, mmax), 1.0 + (mmax - 1.0) * r, 1e-12, "boost_strength")?;

            let rows: Vec<Vec<f64>> = (0..rng.random_range(1..8))
                .map(|_| (0..v).map(|_| rng.random_range(-10.0..10.0)).collect())
                .collect();
            let gv = grounding_vector(&rows).unwrap();
            let probs: Vec<Vec<f64>> = rows.iter().map(|r| oracle_softmax(r)).collect();
            for k in 0..v {
                let best = probs.iter().map(|p| p[k]).fold(0.0, f64::max);
                within(gv.get(k), best, 1e-12, "grounding_vector")?;
            }
        }
        Ok(format!("{n} random inputs within 1e-12"))
    })
}

fn c2_endpoint_exactness() -> Outcome {
    for m in [1.0, 1.05, 1.1, 1.3, 1.7, 2.0, 2.5, 10.0] {
        if boost_strength(0.0, m) != 1.0 {
            return Err(format!("r = 0 gives {} for m_vis_max {m}", boost_strength(0.0, m)));
        }
        if boost_strength(1.0, m) != m {
            return Err(format!("r = 1 gives {} for m_vis_max {m}", boost_strength(1.0, m)));
        }
    }
    for v in [2, 3, 10, 33, 1000] {
        let uniform = ProbVector::new(vec![1.0 / v as f64; v]).unwrap();
        within(normalized_entropy(&uniform).unwrap(), 1.0, 1e-12, "uniform")?;
        let mut hot = vec![0.0; v];
        hot[v / 2] = 1.0;
        within(normalized_entropy(&ProbVector::new(hot).unwrap()).unwrap(), 0.0, 1e-12, "one-hot")?;
    }
    Ok("boost endpoints exact, entropy endpoints within 1e-12".into())
}

fn function_tokens(rng: &mut ChaCha8Rng, config: &ModelConfig, n: usize) -> Vec<TokenId> {
    let pool: Vec<TokenId> = (0..config.vocab_size).filter(|&t| config.vocab.is_function(t)).collect();
    (0..n).map(|_| pool[rng.random_range(0..pool.len())]).collect()
}

fn random_image(rng: &mut ChaCha8Rng, config: &ModelConfig) -> SyntheticImage {
    sample_episode(rng.random(), config, &TestbedConfig::default()).unwrap().0
}

fn c3_vanilla_equivalence(config: &ModelConfig, weights: &ModelWeights) -> Outcome {
    timed(Duration::from_secs(30), || {
        let mut rng = ChaCha8Rng::seed_from_u64(0xA3);
        let unit = InterventionConfig {
            m_vis_max: 1.0,
            m_txt_max: 1.0,
            scope: SuppressionScope::AllText,
            ..InterventionConfig::llava_style(config.n_layers)
        };
        for k in 0..100 {
            let image = random_image(&mut rng, config);
            let n_sys = rng.random_range(1..4);
            let sys = function_tokens(&mut rng, config, n_sys);
            let n_in = rng.random_range(1..5);
            let input = function_tokens(&mut rng, config, n_in);
            let out = |mode: Mode| {
                let mut req = GenerationRequest::new(image.clone(), config, mode, 10);
                req.system_tokens = sys.clone();
                req.input_tokens = input.clone();
                generate(&req, weights, config).unwrap().tokens
            };
            let (a, b) = (out(Mode::Vanilla), out(Mode::AdaVBoost(unit.clone())));
            if a != b {
                return Err(format!("triple {k}: {a:?} vs {b:?}"));
            }
        }
        Ok("100 triples bit-identical".into())
    })
}

fn c4_lag_invariant(config: &ModelConfig, weights: &ModelWeights) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA4);
    let cfg = InterventionConfig {
        m_vis_max: 1.6,
        ..InterventionConfig::llava_style(config.n_layers)
    };
    let mut steps = 0;
    for k in 0..100 {
        let image = random_image(&mut rng, config);
        let req = GenerationRequest::new(image, config, Mode::AdaVBoost(cfg.clone()), 12);
        let trace = generate(&req, weights, config).unwrap().trace;
        if trace[0].m != 1.0 {
            return Err(format!("trace {k}: step 1 has m = {}", trace[0].m));
        }
        for w in trace.windows(2) {
            if w[1].m != boost_strength(w[0].r, cfg.m_vis_max) {
                return Err(format!("trace {k} step {}: m = {} from r = {}", w[1].step, w[1].m, w[0].r));
            }
            within(w[1].m, 1.0 + (cfg.m_vis_max - 1.0) * w[0].r, 1e-15, "m from previous r")?;
        }
        steps += trace.len();
    }
    Ok(format!("100 traces, {steps} steps"))
}

fn mass(scores: &[f64], seg: &SegmentMap, which: Segment) -> f64 {
    oracle_softmax(scores)
        .iter()
        .zip(seg.labels())
        .filter(|(_, s)| **s == which)
        .map(|(w, _)| w)
        .sum()
}

fn c5_mass_monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA5);
    let factors: Vec<f64> = (0..=10).map(|i| 1.0 + 0.1 * i as f64).collect();
    let mut violations = 0;
    for _ in 0..1000 {
        let mut seg = SegmentMap::for_prompt(rng.random_range(1..12), rng.random_range(0..4), rng.random_range(1..6));
        for _ in 0..rng.random_range(0..8) {
            seg.push_generated();
        }
        let scores: Vec<f64> = seg
            .labels()
            .iter()
            .map(|s| if *s == Segment::Visual { rng.random_range(0.0..5.0) } else { rng.random_range(-3.0..5.0) })
            .collect();
        let row = ScoreRow { layer: 0, scores };
        let boost = |m: f64| InterventionConfig {
            alpha: 0.5,
            gamma: 0.5,
            m_vis_max: m,
            m_txt_max: 1.0,
            layer_start: 0,
            layer_end: 1,
            scope: SuppressionScope::None,
        };
        let vis: Vec<f64> = factors
            .iter()
            .map(|&m| mass(&apply(&row, &seg, &boost(m), m).scores, &seg, Segment::Visual))
            .collect();
        violations += vis.windows(2).filter(|w| w[1] < w[0]).count();

        let text_row = ScoreRow {
            layer: 0,
            scores: row.scores.iter().map(|x| x.abs()).collect(),
        };
        let suppress = |m: f64| InterventionConfig {
            m_txt_max: m,
            scope: SuppressionScope::TextInputOnly,
            ..boost(1.0)
        };
        let txt: Vec<f64> = factors
            .iter()
            .map(|&m| mass(&apply(&text_row, &seg, &suppress(m), 1.0).scores, &seg, Segment::TextInput))
            .collect();
        violations += txt.windows(2).filter(|w| w[1] > w[0]).count();
    }
    if violations > 0 {
        return Err(format!("{violations} violations"));
    }
    Ok("1000 rows, boost and suppression, zero violations".into())
}

fn c6_cache_consistency(config: &ModelConfig, weights: &ModelWeights) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA6);
    let vocab = &config.vocab;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let image = random_image(&mut rng, config);
        let visual = encode_image(&image, weights, config).unwrap();
        let seq: Vec<TokenId> = (0..32).map(|_| rng.random_range(0..config.vocab_size)).collect();
        let full = full_sequence_logits(weights, config, &visual, &vocab.system_prompt, &vocab.input_prompt, &seq).unwrap();
        let mut state = prefill(weights, config, &visual, &vocab.system_prompt, &vocab.input_prompt).unwrap().state;
        for (t, &tok) in seq.iter().enumerate() {
            state.feed(tok);
            let step = decode_step(&mut state, weights, config, &mut Identity).unwrap();
            for (a, b) in step.logits.iter().zip(&full[t]) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    if worst > 1e-9 {
        return Err(format!("max difference {worst:e}"));
    }
    Ok(format!("50 sequences x 32 tokens, max difference {worst:e}"))
}

/// `P(X >= k)`, `X ~ Binomial(n, 1/2)`, by Pascal's triangle.
fn oracle_upper_tail(n: usize, k: usize) -> f64 {
    let mut row = vec![1.0f64];
    for _ in 0..n {
        let mut next = vec![0.5 * row[0]];
        for w in row.windows(2) {
            next.push(0.5 * (w[0] + w[1]));
        }
        next.push(0.5 * row[row.len() - 1]);
        row = next;
    }
    row[k.min(n + 1)..].iter().sum()
}

fn per_episode(episodes: &[Episode], label: &str, config: &ModelConfig) -> Vec<f64> {
    episodes
        .iter()
        .map(|e| episode_rate(&e.runs[label].tokens, &e.image, &config.vocab))
        .collect()
}

fn c7_reduction(episodes: &[Episode], config: &ModelConfig, took: Duration) -> Outcome {
    let report = hallucination_metrics(episodes, "vanilla", &config.vocab).map_err(|e| e.to_string())?;
    let van = report.modes["vanilla"].hallucination_rate;
    let ada = report.modes["adavboost"].hallucination_rate;
    let (a, v) = (per_episode(episodes, "adavboost", config), per_episode(episodes, "vanilla", config));
    let wins = a.iter().zip(&v).filter(|(x, y)| x < y).count();
    let losses = a.iter().zip(&v).filter(|(x, y)| x > y).count();
    let p = oracle_upper_tail(wins + losses, wins);
    let detail = format!(
        "vanilla {van:.3}, adavboost {ada:.3}, {wins} wins / {losses} losses, p = {p:.2e}, {took:.2?}"
    );
    if ada < van && p < 0.01 && took < Duration::from_secs(120) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c8_dual_effect(episodes: &[Episode], config: &ModelConfig) -> Outcome {
    let report = hallucination_metrics(episodes, "vanilla", &config.vocab).map_err(|e| e.to_string())?;
    let c = report.versus_baseline["fixed_boost_1.2"];
    // Recount position by position.
    let (mut res, mut rem, mut new) = (0, 0, 0);
    for e in episodes {
        let hall = |t: &TokenId| config.vocab.is_concept(*t) && !e.image.contains(*t);
        let (b, f) = (&e.runs["vanilla"].tokens, &e.runs["fixed_boost_1.2"].tokens);
        for k in 0..b.len().max(f.len()) {
            match (b.get(k).is_some_and(hall), f.get(k).is_some_and(hall)) {
                (true, false) => res += 1,
                (true, true) => rem += 1,
                (false, true) => new += 1,
                _ => {}
            }
        }
    }
    let detail = format!("resolved {res}, remaining {rem}, newly introduced {new}");
    if (c.resolved, c.remaining, c.newly_introduced) != (res, rem, new) {
        return Err(format!("{detail}; library reported {c:?}"));
    }
    if res > 0 && rem > 0 && new > 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c9_vg_gap(episodes: &[Episode], config: &ModelConfig) -> Outcome {
    let tokens = labeled_tokens(episodes, "vanilla", &config.vocab).map_err(|e| e.to_string())?;
    let gap = low_entropy_vg_gap(&tokens);
    let (Some(d), Some(se)) = (gap.difference, gap.standard_error) else {
        return Err(format!("region lacks one class: {gap:?}"));
    };
    let detail = format!(
        "mean G hallucinated {:.4} (n={}), normal {:.4} (n={}), gap {d:.4}, 3 SE = {:.4}",
        gap.mean_hallucinated.unwrap(),
        gap.n_hallucinated,
        gap.mean_normal.unwrap(),
        gap.n_normal,
        3.0 * se
    );
    if d > 3.0 * se {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c10_risk_ordering(episodes: &[Episode], config: &ModelConfig) -> Outcome {
    let tokens = labeled_tokens(episodes, "vanilla", &config.vocab).map_err(|e| e.to_string())?;
    let q = quantile_correlation(&tokens).map_err(|e| e.to_string())?;
    let e = q.entropy_spearman.unwrap_or(f64::NEG_INFINITY);
    let v = q.vge_spearman.unwrap_or(f64::NEG_INFINITY);
    let detail = format!("spearman vge {v:.3} vs entropy {e:.3}");
    if v >= e {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c11_overhead() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = RunConfig {
        modes: vec!["vanilla".into(), "adavboost".into()],
        workers: 1,
        out_dir: dir.path().to_path_buf(),
        ..RunConfig::default()
    };
    cfg.testbed.episodes = 1300;
    let out = cmd_compare(&cfg).map_err(|e| e.to_string())?;
    let tokens = out.latency["adavboost"].tokens;
    let ratio = out.latency_ratio["adavboost"];
    let detail = format!(
        "{tokens} tokens, {:.4} vs {:.4} ms/token, ratio {ratio:.3}",
        out.latency["adavboost"].ms_per_token, out.latency["vanilla"].ms_per_token
    );
    if tokens >= 10_000 && ratio <= 1.10 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

#[test]
fn acceptance() {
    let config = ModelConfig::default();
    let weights = build_model(&config).unwrap();

    let mut results: Vec<(&str, Outcome)> = vec![
        ("oracle arithmetic", c1_oracle_arithmetic()),
        ("endpoint exactness", c2_endpoint_exactness()),
        ("vanilla equivalence", c3_vanilla_equivalence(&config, &weights)),
        ("lag invariant", c4_lag_invariant(&config, &weights)),
        ("mass monotonicity", c5_mass_monotonicity()),
        ("cache consistency", c6_cache_consistency(&config, &weights)),
    ];

    let cfg = InterventionConfig::llava_style(config.n_layers);
    assert_eq!((cfg.alpha, cfg.gamma, cfg.m_vis_max, cfg.m_txt_max), (0.5, 0.5, 1.1, 1.7));
    assert!(config.construction.prior_bias > 0.0);
    let testbed = TestbedConfig {
        episodes: 200,
        ..TestbedConfig::default()
    };
    let modes = [Mode::Vanilla, Mode::AdaVBoost(cfg), Mode::FixedBoost { factor: 1.2 }];
    let t = Instant::now();
    let episodes = run_episodes(&weights, &config, &testbed, &modes, Default::default(), DEFAULT_TRACE_RISK, 4).unwrap();
    let took = t.elapsed();
    results.push(("testbed hallucination reduction", c7_reduction(&episodes, &config, took)));
    results.push(("dual effect", c8_dual_effect(&episodes, &config)));
    results.push(("VG complementarity", c9_vg_gap(&episodes, &config)));
    results.push(("risk ordering", c10_risk_ordering(&episodes, &config)));
    results.push(("overhead budget", c11_overhead()));

    let mut failed = Vec::new();
    for (i, (name, outcome)) in results.iter().enumerate() {
        match outcome {
            Ok(d) => println!("PASS criterion {:>2} {name}: {d}", i + 1),
            Err(d) => {
                println!("FAIL criterion {:>2} {name}: {d}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
