//! Synthetic grounded-description task with exact hallucination labels.
//!
//! An episode is an image (a set of grounded concept ids) plus the fixed
//! "describe" prompt. A generated token is hallucinated iff it is a concept id
//! outside the image's grounded set; no judge is involved.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generation::{generate, Decoding, GenerationRequest, Mode, TokenTrace};
use crate::model::{ModelConfig, ModelWeights, SyntheticImage, TokenId, VocabLayout};
use crate::risk::RiskParams;

pub const N_QUANTILES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestbedConfig {
    pub episodes: usize,
    pub min_grounded: usize,
    pub max_grounded: usize,
    pub max_new_tokens: usize,
    pub seed: u64,
}

impl Default for TestbedConfig {
    fn default() -> Self {
        Self {
            episodes: 200,
            min_grounded: 2,
            max_grounded: 4,
            max_new_tokens: 8,
            seed: 7,
        }
    }
}

impl TestbedConfig {
    pub fn validate(&self, model: &ModelConfig) -> Result<()> {
        if self.min_grounded == 0 || self.min_grounded > self.max_grounded {
            return Err(Error::Config("need 1 <= min_grounded <= max_grounded".into()));
        }
        if self.max_grounded > model.vocab.n_concepts || self.max_grounded > model.n_visual_tokens {
            return Err(Error::Config(
                "max_grounded exceeds the concept count or the visual slots".into(),
            ));
        }
        if self.max_new_tokens == 0 {
            return Err(Error::Config("max_new_tokens must be at least 1".into()));
        }
        Ok(())
    }
}

/// The prompt of an episode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub system_tokens: Vec<TokenId>,
    pub input_tokens: Vec<TokenId>,
}

/// Draws the grounded set uniformly without replacement from the concept ids.
pub fn sample_episode(
    seed: u64,
    model: &ModelConfig,
    testbed: &TestbedConfig,
) -> Result<(SyntheticImage, Prompt)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(testbed.min_grounded..=testbed.max_grounded);
    let vocab = &model.vocab;
    let concepts = sample(&mut rng, vocab.n_concepts, n)
        .into_iter()
        .map(|i| vocab.concept_start + i);
    let image = SyntheticImage::new(concepts, model)?;
    let prompt = Prompt {
        system_tokens: vocab.system_prompt.clone(),
        input_tokens: vocab.input_prompt.clone(),
    };
    Ok((image, prompt))
}

/// Seed of episode `index` under a testbed seed.
pub fn episode_seed(testbed_seed: u64, index: usize) -> u64 {
    testbed_seed
        .wrapping_mul(6_364_136_223_846_793_005)
        .wrapping_add((index as u64).wrapping_mul(1_442_695_040_888_963_407))
        .wrapping_add(1)
}

/// Output of one mode on one episode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeRun {
    pub tokens: Vec<TokenId>,
    pub trace: TokenTrace,
    pub decode_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub index: usize,
    pub image: SyntheticImage,
    pub prompt: Prompt,
    /// Keyed by mode label.
    pub runs: BTreeMap<String, ModeRun>,
}

pub fn is_hallucinated(token: TokenId, image: &SyntheticImage, vocab: &VocabLayout) -> bool {
    vocab.is_concept(token) && !image.contains(token)
}

/// Mode labels with repeats disambiguated (`vanilla`, `vanilla_2`, ...).
pub fn mode_labels(modes: &[Mode]) -> Vec<String> {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    modes
        .iter()
        .map(|m| {
            let base = m.label();
            let n = seen.entry(base.clone()).or_insert(0);
            *n += 1;
            if *n == 1 {
                base
            } else {
                format!("{base}_{n}")
            }
        })
        .collect()
}

/// Runs every mode on every episode. Episodes fan out over `workers` threads;
/// the result is in episode order regardless. Sampling seeds are mixed with
/// the episode index so episodes draw independent streams.
pub fn run_episodes(
    weights: &ModelWeights,
    model: &ModelConfig,
    testbed: &TestbedConfig,
    modes: &[Mode],
    decoding: Decoding,
    trace_risk: RiskParams,
    workers: usize,
) -> Result<Vec<Episode>> {
    testbed.validate(model)?;
    let labels = mode_labels(modes);
    let run_one = |index: usize| -> Result<Episode> {
        let (image, prompt) = sample_episode(episode_seed(testbed.seed, index), model, testbed)?;
        let decoding = match decoding {
            Decoding::Greedy => Decoding::Greedy,
            Decoding::Sample { seed, temperature } => Decoding::Sample {
                seed: episode_seed(seed, index),
                temperature,
            },
        };
        let mut runs = BTreeMap::new();
        for (mode, label) in modes.iter().zip(&labels) {
            let request = GenerationRequest {
                image: image.clone(),
                system_tokens: prompt.system_tokens.clone(),
                input_tokens: prompt.input_tokens.clone(),
                max_new_tokens: testbed.max_new_tokens,
                mode: mode.clone(),
                decoding,
                trace_risk,
            };
            let out = generate(&request, weights, model)?;
            runs.insert(
                label.clone(),
                ModeRun {
                    decode_ms: (out.duration - out.prefill_duration).as_secs_f64() * 1e3,
                    total_ms: out.duration.as_secs_f64() * 1e3,
                    tokens: out.tokens,
                    trace: out.trace,
                },
            );
        }
        Ok(Episode {
            index,
            image,
            prompt,
            runs,
        })
    };
    if workers <= 1 {
        return (0..testbed.episodes).map(run_one).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    pool.install(|| (0..testbed.episodes).into_par_iter().map(run_one).collect())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModeStats {
    pub generated_tokens: usize,
    pub concept_tokens: usize,
    pub hallucinated: usize,
    /// Hallucinated tokens over generated tokens, pooled over episodes.
    pub hallucination_rate: f64,
    /// Mean of the per-episode hallucination rates.
    pub mean_episode_rate: f64,
    /// Grounded concept tokens over concept tokens.
    pub grounded_token_rate: f64,
}

/// Position-aligned comparison of a mode against the baseline.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossModeStats {
    /// Hallucinated in the baseline, clean (or absent) in the mode.
    pub resolved: usize,
    /// Hallucinated in both at the same position.
    pub remaining: usize,
    /// Clean (or absent) in the baseline, hallucinated in the mode.
    pub newly_introduced: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HallucinationReport {
    pub episodes: usize,
    pub baseline: String,
    pub modes: BTreeMap<String, ModeStats>,
    pub versus_baseline: BTreeMap<String, CrossModeStats>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn episode_rate(tokens: &[TokenId], image: &SyntheticImage, vocab: &VocabLayout) -> f64 {
    let h = tokens.iter().filter(|t| is_hallucinated(**t, image, vocab)).count();
    ratio(h, tokens.len())
}

/// Position-aligned resolved / remaining / new counts for one episode.
pub fn compare_outputs(
    baseline: &[TokenId],
    other: &[TokenId],
    image: &SyntheticImage,
    vocab: &VocabLayout,
) -> CrossModeStats {
    let mut out = CrossModeStats::default();
    for k in 0..baseline.len().max(other.len()) {
        let base = baseline.get(k).is_some_and(|t| is_hallucinated(*t, image, vocab));
        let mode = other.get(k).is_some_and(|t| is_hallucinated(*t, image, vocab));
        match (base, mode) {
            (true, true) => out.remaining += 1,
            (true, false) => out.resolved += 1,
            (false, true) => out.newly_introduced += 1,
            (false, false) => {}
        }
    }
    out
}

pub fn hallucination_metrics(
    episodes: &[Episode],
    baseline: &str,
    vocab: &VocabLayout,
) -> Result<HallucinationReport> {
    let first = episodes
        .first()
        .ok_or_else(|| Error::Report("no episodes".into()))?;
    let labels: Vec<String> = first.runs.keys().cloned().collect();
    if !labels.iter().any(|l| l == baseline) {
        return Err(Error::Report(format!("baseline mode {baseline} was not run")));
    }
    let mut modes = BTreeMap::new();
    let mut versus = BTreeMap::new();
    for label in &labels {
        let mut stats = ModeStats::default();
        let mut cross = CrossModeStats::default();
        let mut rate_sum = 0.0;
        let mut grounded = 0;
        for ep in episodes {
            let run = ep.runs.get(label).ok_or_else(|| {
                Error::Report(format!("episode {} is missing mode {label}", ep.index))
            })?;
            let base = ep.runs.get(baseline).ok_or_else(|| {
                Error::Report(format!("episode {} is missing mode {baseline}", ep.index))
            })?;
            stats.generated_tokens += run.tokens.len();
            for &t in &run.tokens {
                if vocab.is_concept(t) {
                    stats.concept_tokens += 1;
                    if ep.image.contains(t) {
                        grounded += 1;
                    } else {
                        stats.hallucinated += 1;
                    }
                }
            }
            rate_sum += episode_rate(&run.tokens, &ep.image, vocab);
            if label != baseline {
                let c = compare_outputs(&base.tokens, &run.tokens, &ep.image, vocab);
                cross.resolved += c.resolved;
                cross.remaining += c.remaining;
                cross.newly_introduced += c.newly_introduced;
            }
        }
        stats.hallucination_rate = ratio(stats.hallucinated, stats.generated_tokens);
        stats.mean_episode_rate = rate_sum / episodes.len() as f64;
        stats.grounded_token_rate = ratio(grounded, stats.concept_tokens);
        if label != baseline {
            versus.insert(label.clone(), cross);
        }
        modes.insert(label.clone(), stats);
    }
    Ok(HallucinationReport {
        episodes: episodes.len(),
        baseline: baseline.to_string(),
        modes,
        versus_baseline: versus,
    })
}

/// One generated token with its risk signals and ground-truth label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledToken {
    pub h_bar: f64,
    pub g: f64,
    pub vge: f64,
    pub hallucinated: bool,
}

/// Flattens one mode's traces over all episodes, in episode then step order.
pub fn labeled_tokens(episodes: &[Episode], mode: &str, vocab: &VocabLayout) -> Result<Vec<LabeledToken>> {
    let mut out = Vec::new();
    for ep in episodes {
        let run = ep
            .runs
            .get(mode)
            .ok_or_else(|| Error::Report(format!("episode {} is missing mode {mode}", ep.index)))?;
        out.extend(run.trace.iter().map(|rec| LabeledToken {
            h_bar: rec.h_bar,
            g: rec.g,
            vge: rec.vge,
            hallucinated: is_hallucinated(rec.token, &ep.image, vocab),
        }));
    }
    Ok(out)
}

/// Ranks of `values` sorted ascending, ties broken by original index.
fn stable_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    idx
}

/// Token totals and hallucination counts per signal decile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantileBuckets {
    pub totals: [usize; N_QUANTILES],
    pub hallucinated: [usize; N_QUANTILES],
}

/// Buckets tokens into deciles of `signal`. A token's bucket is set by the
/// lowest sorted rank among tokens with an equal signal value, so equal
/// values always share a bucket.
pub fn decile_buckets(signal: &[f64], labels: &[bool]) -> QuantileBuckets {
    let n = signal.len();
    let order = stable_order(signal);
    let mut out = QuantileBuckets {
        totals: [0; N_QUANTILES],
        hallucinated: [0; N_QUANTILES],
    };
    let mut group_rank = 0;
    for (rank, &i) in order.iter().enumerate() {
        if rank > 0 && signal[order[rank - 1]] != signal[i] {
            group_rank = rank;
        }
        let bucket = group_rank * N_QUANTILES / n;
        out.totals[bucket] += 1;
        if labels[i] {
            out.hallucinated[bucket] += 1;
        }
    }
    out
}

/// Average ranks (1-based), ties share the mean of their positions.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let order = stable_order(values);
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[order[k]] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation; `None` when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileReport {
    pub entropy: QuantileBuckets,
    pub vge: QuantileBuckets,
    /// Spearman correlation between decile index and hallucination count.
    pub entropy_spearman: Option<f64>,
    pub vge_spearman: Option<f64>,
}

pub const MIN_QUANTILE_TOKENS: usize = 100;

pub fn quantile_correlation(tokens: &[LabeledToken]) -> Result<QuantileReport> {
    if tokens.len() < MIN_QUANTILE_TOKENS {
        return Err(Error::Precondition(format!(
            "quantile analysis needs at least {MIN_QUANTILE_TOKENS} labeled tokens, got {}",
            tokens.len()
        )));
    }
    let labels: Vec<bool> = tokens.iter().map(|t| t.hallucinated).collect();
    let entropy = decile_buckets(&tokens.iter().map(|t| t.h_bar).collect::<Vec<_>>(), &labels);
    let vge = decile_buckets(&tokens.iter().map(|t| t.vge).collect::<Vec<_>>(), &labels);
    let index: Vec<f64> = (0..N_QUANTILES).map(|i| i as f64).collect();
    let counts = |b: &QuantileBuckets| b.hallucinated.iter().map(|&c| c as f64).collect::<Vec<_>>();
    Ok(QuantileReport {
        entropy_spearman: spearman(&index, &counts(&entropy)),
        vge_spearman: spearman(&index, &counts(&vge)),
        entropy,
        vge,
    })
}

/// Mean grounding of hallucinated vs. normal tokens in the low-entropy half.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VgGap {
    pub n_hallucinated: usize,
    pub n_normal: usize,
    pub mean_hallucinated: Option<f64>,
    pub mean_normal: Option<f64>,
    /// `mean_normal - mean_hallucinated`.
    pub difference: Option<f64>,
    /// `sqrt(var_h / n_h + var_n / n_n)` with sample variances.
    pub standard_error: Option<f64>,
}

fn mean_var(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Some((mean, var))
}

/// The low-entropy region is the first `n / 2` tokens after a stable sort by
/// normalized entropy (ties by lower index first).
pub fn low_entropy_vg_gap(tokens: &[LabeledToken]) -> VgGap {
    let entropy: Vec<f64> = tokens.iter().map(|t| t.h_bar).collect();
    let order = stable_order(&entropy);
    let region = &order[..tokens.len() / 2];
    let (hall, normal): (Vec<usize>, Vec<usize>) =
        region.iter().partition(|&&i| tokens[i].hallucinated);
    let g = |idx: &[usize]| idx.iter().map(|&i| tokens[i].g).collect::<Vec<_>>();
    let h = mean_var(&g(&hall));
    let n = mean_var(&g(&normal));
    let (difference, standard_error) = match (h, n) {
        (Some((mh, vh)), Some((mn, vn))) => (
            Some(mn - mh),
            Some((vh / hall.len() as f64 + vn / normal.len() as f64).sqrt()),
        ),
        _ => (None, None),
    };
    VgGap {
        n_hallucinated: hall.len(),
        n_normal: normal.len(),
        mean_hallucinated: h.map(|x| x.0),
        mean_normal: n.map(|x| x.0),
        difference,
        standard_error,
    }
}

/// One-sided paired sign test for "treatment < control".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    pub p_value: f64,
}

/// `P(X >= k)` for `X ~ Binomial(n, 1/2)`.
pub fn binomial_upper_tail(n: usize, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    let ln_half_n = -(n as f64) * std::f64::consts::LN_2;
    let mut ln_choose = 0.0;
    let mut total = 0.0;
    for i in 0..=n {
        if i > 0 {
            ln_choose += ((n - i + 1) as f64).ln() - (i as f64).ln();
        }
        if i >= k {
            total += (ln_choose + ln_half_n).exp();
        }
    }
    total.min(1.0)
}

pub fn sign_test(treatment: &[f64], control: &[f64]) -> SignTest {
    let mut wins = 0;
    let mut losses = 0;
    let mut ties = 0;
    for (t, c) in treatment.iter().zip(control) {
        if t < c {
            wins += 1;
        } else if t > c {
            losses += 1;
        } else {
            ties += 1;
        }
    }
    SignTest {
        wins,
        losses,
        ties,
        p_value: binomial_upper_tail(wins + losses, wins),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ModelConfig {
        ModelConfig::default()
    }

    fn image(ids: &[TokenId]) -> SyntheticImage {
        SyntheticImage::new(ids.iter().copied(), &cfg()).unwrap()
    }

    #[test]
    fn episodes_are_reproducible_and_partitioned() {
        let model = cfg();
        let tb = TestbedConfig::default();
        for seed in 0..50 {
            let (a, pa) = sample_episode(seed, &model, &tb).unwrap();
            let (b, pb) = sample_episode(seed, &model, &tb).unwrap();
            assert_eq!(a, b);
            assert_eq!(pa, pb);
            let n = a.grounded().len();
            assert!((tb.min_grounded..=tb.max_grounded).contains(&n));
            assert!(a.grounded().iter().all(|&t| model.vocab.is_concept(t)));
        }
    }

    #[test]
    fn labels_are_set_membership() {
        let vocab = cfg().vocab;
        let img = image(&[16, 20]);
        assert!(!is_hallucinated(16, &img, &vocab));
        assert!(is_hallucinated(17, &img, &vocab));
        assert!(!is_hallucinated(0, &img, &vocab));
        // [c1, d, c2] with d an ungrounded concept
        assert_eq!(episode_rate(&[16, 25, 20], &img, &vocab), 1.0 / 3.0);
        assert_eq!(episode_rate(&[16, 20], &img, &vocab), 0.0);
    }

    #[test]
    fn position_aligned_categories() {
        let vocab = cfg().vocab;
        let img = image(&[16, 20]);
        // d -> c3, both ungrounded: remaining
        let c = compare_outputs(&[16, 25, 20], &[16, 27, 20], &img, &vocab);
        assert_eq!(c, CrossModeStats { resolved: 0, remaining: 1, newly_introduced: 0 });
        // d -> grounded: resolved; clean -> ungrounded: new
        let c = compare_outputs(&[16, 25, 20], &[16, 20, 27], &img, &vocab);
        assert_eq!(c, CrossModeStats { resolved: 1, remaining: 0, newly_introduced: 1 });
        // shorter output drops a hallucination
        let c = compare_outputs(&[16, 25], &[16], &img, &vocab);
        assert_eq!(c.resolved, 1);
    }

    fn episode_with(index: usize, img: SyntheticImage, runs: &[(&str, Vec<TokenId>)]) -> Episode {
        Episode {
            index,
            image: img,
            prompt: Prompt { system_tokens: vec![], input_tokens: vec![] },
            runs: runs
                .iter()
                .map(|(l, t)| {
                    (
                        l.to_string(),
                        ModeRun { tokens: t.clone(), trace: vec![], decode_ms: 0.0, total_ms: 0.0 },
                    )
                })
                .collect(),
        }
    }

    #[test]
    fn report_partitions_baseline_hallucinations() {
        let vocab = cfg().vocab;
        let eps = vec![
            episode_with(0, image(&[16, 20]), &[("vanilla", vec![16, 25, 20]), ("x", vec![16, 20, 27])]),
            episode_with(1, image(&[18]), &[("vanilla", vec![18, 19, 21]), ("x", vec![18, 19, 0])]),
        ];
        let rep = hallucination_metrics(&eps, "vanilla", &vocab).unwrap();
        let v = &rep.modes["vanilla"];
        let x = &rep.versus_baseline["x"];
        assert_eq!(v.hallucinated, 3);
        assert_eq!(x.resolved + x.remaining, v.hallucinated);
        assert_eq!(rep.modes["x"].hallucinated, 2);

        let missing = vec![episode_with(0, image(&[16]), &[("x", vec![16])])];
        assert!(matches!(hallucination_metrics(&missing, "vanilla", &vocab), Err(Error::Report(_))));
        let ragged = vec![
            episode_with(0, image(&[16]), &[("vanilla", vec![16]), ("x", vec![16])]),
            episode_with(1, image(&[16]), &[("vanilla", vec![16])]),
        ];
        assert!(hallucination_metrics(&ragged, "vanilla", &vocab).is_err());
    }

    #[test]
    fn identical_modes_have_zero_deltas() {
        let vocab = cfg().vocab;
        let eps = vec![episode_with(0, image(&[16]), &[("vanilla", vec![16, 17]), ("same", vec![16, 17])])];
        let rep = hallucination_metrics(&eps, "vanilla", &vocab).unwrap();
        let c = rep.versus_baseline["same"];
        assert_eq!(c.resolved, 0);
        assert_eq!(c.newly_introduced, 0);
        assert_eq!(c.remaining, rep.modes["vanilla"].hallucinated);
    }

    #[test]
    fn identical_signal_lands_in_one_bucket() {
        let b = decile_buckets(&[0.3; 57], &[true; 57]);
        assert_eq!(b.totals[0], 57);
        assert_eq!(b.totals.iter().sum::<usize>(), 57);
    }

    #[test]
    fn buckets_partition_tokens() {
        let signal: Vec<f64> = (0..123).map(|i| ((i * 37) % 101) as f64).collect();
        let labels: Vec<bool> = (0..123).map(|i| i % 3 == 0).collect();
        let b = decile_buckets(&signal, &labels);
        assert_eq!(b.totals.iter().sum::<usize>(), 123);
        assert_eq!(b.hallucinated.iter().sum::<usize>(), labels.iter().filter(|x| **x).count());
    }

    #[test]
    fn spearman_known_values() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(spearman(&x, &[2.0, 4.0, 6.0, 8.0, 10.0]), Some(1.0));
        assert_eq!(spearman(&x, &[5.0, 4.0, 3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&x, &[1.0; 5]), None);
        // d = [0, 0, 1, -1, 0] => 1 - 6*2/(5*24) = 0.9
        let r = spearman(&x, &[1.0, 2.0, 4.0, 3.0, 5.0]).unwrap();
        assert!((r - 0.9).abs() < 1e-12);
    }

    #[test]
    fn quantile_needs_enough_tokens() {
        let toks = vec![LabeledToken { h_bar: 0.1, g: 0.5, vge: 0.2, hallucinated: false }; 99];
        assert!(matches!(quantile_correlation(&toks), Err(Error::Precondition(_))));
    }

    #[test]
    fn vg_gap_empty_class_is_undefined() {
        let toks: Vec<LabeledToken> = (0..10)
            .map(|i| LabeledToken { h_bar: i as f64, g: 0.5, vge: 0.0, hallucinated: false })
            .collect();
        let gap = low_entropy_vg_gap(&toks);
        assert_eq!(gap.n_normal, 5);
        assert_eq!(gap.mean_hallucinated, None);
        assert_eq!(gap.difference, None);
    }

    #[test]
    fn vg_gap_region_tie_rule() {
        // all entropies equal: the region is the first half by index
        let toks: Vec<LabeledToken> = (0..6)
            .map(|i| LabeledToken { h_bar: 0.2, g: i as f64, vge: 0.0, hallucinated: i % 2 == 0 })
            .collect();
        let gap = low_entropy_vg_gap(&toks);
        // region = indices 0, 1, 2: hallucinated {0, 2}, normal {1}
        assert_eq!(gap.n_hallucinated, 2);
        assert_eq!(gap.mean_hallucinated, Some(1.0));
        assert_eq!(gap.mean_normal, Some(1.0));
    }

    #[test]
    fn binomial_tail_values() {
        assert_eq!(binomial_upper_tail(3, 0), 1.0);
        assert!((binomial_upper_tail(3, 3) - 0.125).abs() < 1e-15);
        assert!((binomial_upper_tail(4, 3) - 5.0 / 16.0).abs() < 1e-15);
        assert!((binomial_upper_tail(10, 9) - 11.0 / 1024.0).abs() < 1e-14);
        let s = sign_test(&[0.0, 0.1, 0.5, 0.2], &[0.1, 0.1, 0.4, 0.3]);
        assert_eq!((s.wins, s.losses, s.ties), (2, 1, 1));
        assert!((s.p_value - 0.5).abs() < 1e-15);
    }
}
