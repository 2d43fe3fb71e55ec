//! Prefill, incremental decoding over a KV cache, and a layer-major
//! full-sequence pass used as the reference for the cache.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ModelConfig, TokenId};
use super::segments::SegmentMap;
use super::weights::{LayerWeights, ModelWeights, LN_EPS};
use crate::error::{Error, Result};
use crate::tensor::{dot, layer_norm_affine, softmax_unchecked, Matrix, ProbVector};

/// Hook applied to every pre-softmax attention score row during decoding.
///
/// `scores` covers every cached position plus the current one, for a single
/// layer and head. `observe` sees the post-softmax weights of the same row.
pub trait ScoreModulator {
    fn modulate(&mut self, layer: usize, head: usize, scores: &mut [f64], segments: &SegmentMap);

    fn observe(&mut self, _layer: usize, _head: usize, _weights: &[f64]) {}
}

/// Leaves every score row untouched.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl ScoreModulator for Identity {
    #[inline]
    fn modulate(&mut self, _: usize, _: usize, _: &mut [f64], _: &SegmentMap) {}
}

impl<F> ScoreModulator for F
where
    F: FnMut(usize, usize, &mut [f64], &SegmentMap),
{
    fn modulate(&mut self, layer: usize, head: usize, scores: &mut [f64], segments: &SegmentMap) {
        self(layer, head, scores, segments)
    }
}

/// Cached keys and values of one layer, row-major `positions x hidden_dim`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LayerCache {
    pub keys: Vec<f64>,
    pub values: Vec<f64>,
}

/// Logits of one decode step (prior bias included) and their softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct StepLogits {
    pub logits: Vec<f64>,
    pub probs: ProbVector,
}

/// Everything a generation session carries between decode steps.
#[derive(Debug, Clone)]
pub struct DecodeState {
    cache: Vec<LayerCache>,
    segments: SegmentMap,
    len: usize,
    /// Token that the next decode step will process.
    pending: TokenId,
    /// Risk estimated at the previous step, `r_0 = 0`.
    pub r_prev: f64,
    pub rng: ChaCha8Rng,
}

impl DecodeState {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn segments(&self) -> &SegmentMap {
        &self.segments
    }

    pub fn cache(&self) -> &[LayerCache] {
        &self.cache
    }

    pub fn pending_token(&self) -> TokenId {
        self.pending
    }

    /// Queues the token processed by the next `decode_step`.
    pub fn feed(&mut self, token: TokenId) {
        self.pending = token;
    }

    /// Reseeds the sampling RNG.
    pub fn seed_rng(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }
}

/// Output of the prefill pass.
#[derive(Debug, Clone)]
pub struct Prefill {
    pub state: DecodeState,
    /// LM-head logits at every visual position, computed in the same pass.
    pub visual_logits: Vec<Vec<f64>>,
}

fn check_token(token: TokenId, config: &ModelConfig) -> Result<()> {
    if token >= config.vocab_size {
        return Err(Error::InvalidInput(format!(
            "token {token} out of range for vocab size {}",
            config.vocab_size
        )));
    }
    Ok(())
}

fn position_row(weights: &ModelWeights, pos: usize) -> Result<&[f64]> {
    if pos >= weights.positions.rows() {
        return Err(Error::InvalidInput(format!(
            "position {pos} exceeds the {}-entry position table",
            weights.positions.rows()
        )));
    }
    Ok(weights.positions.row(pos))
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Builds the joint input sequence (embeddings plus positions).
fn prompt_inputs(
    weights: &ModelWeights,
    config: &ModelConfig,
    visual_embeds: &Matrix,
    system_tokens: &[TokenId],
    input_tokens: &[TokenId],
    continuation: &[TokenId],
) -> Result<Vec<Vec<f64>>> {
    if visual_embeds.rows() != config.n_visual_tokens || visual_embeds.cols() != config.hidden_dim {
        return Err(Error::Shape(format!(
            "visual embeddings must be {}x{}, got {}x{}",
            config.n_visual_tokens,
            config.hidden_dim,
            visual_embeds.rows(),
            visual_embeds.cols()
        )));
    }
    let mut rows = Vec::new();
    for i in 0..visual_embeds.rows() {
        rows.push(add(visual_embeds.row(i), position_row(weights, i)?));
    }
    for &tok in system_tokens.iter().chain(input_tokens).chain(continuation) {
        check_token(tok, config)?;
        let pos = rows.len();
        rows.push(add(weights.embedding.row(tok), position_row(weights, pos)?));
    }
    Ok(rows)
}

fn mlp(layer: &LayerWeights, x: &mut [f64]) {
    let a = layer_norm_affine(x, &layer.ln2_gain, &layer.ln2_bias, LN_EPS);
    let hidden: Vec<f64> = (0..layer.w1.rows())
        .map(|u| (dot(layer.w1.row(u), &a) + layer.b1[u]).max(0.0))
        .collect();
    for (r, xr) in x.iter_mut().enumerate() {
        *xr += dot(layer.w2.row(r), &hidden) + layer.b2[r];
    }
}

/// Tied LM head without the prior bias.
pub fn lm_head(weights: &ModelWeights, residual: &[f64]) -> Vec<f64> {
    let h = layer_norm_affine(residual, &weights.final_gain, &weights.final_bias, LN_EPS);
    weights.embedding.matvec(&h)
}

fn with_prior_bias(weights: &ModelWeights, mut logits: Vec<f64>) -> Vec<f64> {
    logits.iter_mut().zip(&weights.prior_bias).for_each(|(z, b)| *z += b);
    logits
}

/// Causal pass over a whole sequence, layer by layer. Returns the final
/// residual of every position and the per-layer keys/values.
fn forward_sequence(
    weights: &ModelWeights,
    config: &ModelConfig,
    mut xs: Vec<Vec<f64>>,
) -> (Vec<Vec<f64>>, Vec<LayerCache>) {
    let d = config.hidden_dim;
    let hd = config.head_dim();
    let inv_sqrt = 1.0 / (hd as f64).sqrt();
    let n = xs.len();
    let mut caches = Vec::with_capacity(weights.layers.len());
    for layer in &weights.layers {
        let normed: Vec<Vec<f64>> = xs
            .iter()
            .map(|x| layer_norm_affine(x, &layer.ln1_gain, &layer.ln1_bias, LN_EPS))
            .collect();
        let q: Vec<Vec<f64>> = normed.iter().map(|a| layer.wq.matvec(a)).collect();
        let mut cache = LayerCache {
            keys: Vec::with_capacity(n * d),
            values: Vec::with_capacity(n * d),
        };
        for a in &normed {
            cache.keys.extend(layer.wk.matvec(a));
            cache.values.extend(layer.wv.matvec(a));
        }
        for (i, x) in xs.iter_mut().enumerate() {
            let mut attn = vec![0.0; d];
            for h in 0..config.n_heads {
                let span = h * hd..(h + 1) * hd;
                let scores: Vec<f64> = (0..=i)
                    .map(|j| dot(&q[i][span.clone()], &cache.keys[j * d..][span.clone()]) * inv_sqrt)
                    .collect();
                let w = softmax_unchecked(&scores);
                for (j, wj) in w.iter().enumerate() {
                    let vj = &cache.values[j * d..][span.clone()];
                    for (o, v) in attn[span.clone()].iter_mut().zip(vj) {
                        *o += wj * v;
                    }
                }
            }
            for (r, xr) in x.iter_mut().enumerate() {
                *xr += dot(layer.wo.row(r), &attn);
            }
            mlp(layer, x);
        }
        caches.push(cache);
    }
    (xs, caches)
}

/// Runs the prompt (visual slots, system prompt, text input) through the model
/// once, filling the KV cache and returning the LM-head logits at every
/// visual position.
pub fn prefill(
    weights: &ModelWeights,
    config: &ModelConfig,
    visual_embeds: &Matrix,
    system_tokens: &[TokenId],
    input_tokens: &[TokenId],
) -> Result<Prefill> {
    let xs = prompt_inputs(weights, config, visual_embeds, system_tokens, input_tokens, &[])?;
    if xs.is_empty() {
        return Err(Error::Precondition("prefill needs at least one position".into()));
    }
    let len = xs.len();
    let (residuals, cache) = forward_sequence(weights, config, xs);
    let visual_logits = residuals[..config.n_visual_tokens]
        .iter()
        .map(|x| lm_head(weights, x))
        .collect();
    let state = DecodeState {
        cache,
        segments: SegmentMap::for_prompt(
            config.n_visual_tokens,
            system_tokens.len(),
            input_tokens.len(),
        ),
        len,
        pending: config.vocab.response_start,
        r_prev: 0.0,
        rng: ChaCha8Rng::seed_from_u64(0),
    };
    Ok(Prefill { state, visual_logits })
}

/// Processes the pending token at the next position. Every layer's score row
/// goes through `modulator` before softmax; the new keys/values are appended
/// to the cache and the returned logits include the prior bias.
pub fn decode_step(
    state: &mut DecodeState,
    weights: &ModelWeights,
    config: &ModelConfig,
    modulator: &mut dyn ScoreModulator,
) -> Result<StepLogits> {
    let token = state.pending;
    check_token(token, config)?;
    let pos = state.len;
    let mut x = add(weights.embedding.row(token), position_row(weights, pos)?);
    state.segments.push_generated();

    let d = config.hidden_dim;
    let hd = config.head_dim();
    let inv_sqrt = 1.0 / (hd as f64).sqrt();
    let n = pos + 1;
    let mut scores = vec![0.0; n];
    for (l, layer) in weights.layers.iter().enumerate() {
        let a = layer_norm_affine(&x, &layer.ln1_gain, &layer.ln1_bias, LN_EPS);
        let q = layer.wq.matvec(&a);
        let cache = &mut state.cache[l];
        cache.keys.extend(layer.wk.matvec(&a));
        cache.values.extend(layer.wv.matvec(&a));
        let mut attn = vec![0.0; d];
        for h in 0..config.n_heads {
            let span = h * hd..(h + 1) * hd;
            for (j, s) in scores.iter_mut().enumerate() {
                *s = dot(&q[span.clone()], &cache.keys[j * d..][span.clone()]) * inv_sqrt;
            }
            modulator.modulate(l, h, &mut scores, &state.segments);
            if let Some(key) = scores.iter().position(|s| !s.is_finite()) {
                return Err(Error::Intervention { layer: l, head: h, key });
            }
            let w = softmax_unchecked(&scores);
            modulator.observe(l, h, &w);
            for (j, wj) in w.iter().enumerate() {
                let vj = &cache.values[j * d..][span.clone()];
                for (o, v) in attn[span.clone()].iter_mut().zip(vj) {
                    *o += wj * v;
                }
            }
        }
        for (r, xr) in x.iter_mut().enumerate() {
            *xr += dot(layer.wo.row(r), &attn);
        }
        mlp(layer, &mut x);
    }
    state.len = n;

    let logits = with_prior_bias(weights, lm_head(weights, &x));
    let probs = ProbVector::new(softmax_unchecked(&logits))?;
    Ok(StepLogits { logits, probs })
}

/// Reference path: one layer-major causal pass over the prompt followed by
/// `continuation` (the tokens fed at decode positions, starting with the
/// response-start token). Returns prior-biased logits at every continuation
/// position, which must match what incremental decoding produces.
pub fn full_sequence_logits(
    weights: &ModelWeights,
    config: &ModelConfig,
    visual_embeds: &Matrix,
    system_tokens: &[TokenId],
    input_tokens: &[TokenId],
    continuation: &[TokenId],
) -> Result<Vec<Vec<f64>>> {
    let xs = prompt_inputs(
        weights,
        config,
        visual_embeds,
        system_tokens,
        input_tokens,
        continuation,
    )?;
    let start = xs.len() - continuation.len();
    let (residuals, _) = forward_sequence(weights, config, xs);
    Ok(residuals[start..]
        .iter()
        .map(|x| with_prior_bias(weights, lm_head(weights, x)))
        .collect())
}
