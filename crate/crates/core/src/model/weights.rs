//! Constructed (untrained) weights for the toy decoder.
//!
//! The residual stream is laid out over a seeded set of directions that are
//! orthonormal whenever `hidden_dim` leaves room for them, and orthogonal to
//! the all-ones vector so layer norm acts as a pure rescaling on that span:
//!
//! * one content direction per vocabulary id,
//! * `one` (present in every token and visual slot; queries read it),
//! * `vis` (carried by the learned positions of the visual slots),
//! * `txt` / `con` (function-token and concept-token flags),
//! * `pad` (carried by empty visual slots).
//!
//! Attention heads all score keys by their structural flags, value and output
//! projections are near-identity, and the LM head is tied to the embedding
//! table. Routing attention mass onto a visual slot holding concept `c`
//! therefore raises the logit of `c`. The first MLP pushes every text
//! position against its own token direction, so a position does not predict
//! its own token and later layers see emitted tokens as negative evidence.
//! The same units write the prior directions at prompt positions, which is
//! how the prompt pulls the response towards the language prior.
//! Every matrix also gets a seeded Gaussian perturbation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use crate::error::Result;
use crate::tensor::{dot, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerWeights {
    pub ln1_gain: Vec<f64>,
    pub ln1_bias: Vec<f64>,
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
    pub wo: Matrix,
    pub ln2_gain: Vec<f64>,
    pub ln2_bias: Vec<f64>,
    /// `mlp_hidden x hidden_dim`
    pub w1: Matrix,
    pub b1: Vec<f64>,
    /// `hidden_dim x mlp_hidden`
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelWeights {
    /// Tied input embedding / LM head, `vocab_size x hidden_dim`.
    pub embedding: Matrix,
    /// Visual encoder output per concept, `vocab_size x hidden_dim`. Same
    /// content as the embedding row but without the token-type flags.
    pub visual_codebook: Matrix,
    /// Learned absolute positions, `max_positions x hidden_dim`.
    pub positions: Matrix,
    /// Embedding of an empty visual slot.
    pub padding: Vec<f64>,
    pub layers: Vec<LayerWeights>,
    pub final_gain: Vec<f64>,
    pub final_bias: Vec<f64>,
    /// Logit bonus added to decode-step logits.
    pub prior_bias: Vec<f64>,
}

pub const LN_EPS: f64 = 1e-5;

struct Basis {
    content: Vec<Vec<f64>>,
    one: Vec<f64>,
    vis: Vec<f64>,
    txt: Vec<f64>,
    con: Vec<f64>,
    pad: Vec<f64>,
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize, std: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z * std
        })
        .collect()
}

fn normalize(v: &mut [f64]) {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

fn project_out(v: &mut [f64], u: &[f64]) {
    let c = dot(v, u);
    v.iter_mut().zip(u).for_each(|(x, y)| *x -= c * y);
}

/// Gram-Schmidt over seeded Gaussian draws, all orthogonal to the ones vector.
/// Once the `d - 1` orthonormal slots are used up, further directions are only
/// mean-free unit vectors.
fn random_directions(rng: &mut ChaCha8Rng, d: usize, count: usize) -> Vec<Vec<f64>> {
    let ones = vec![1.0 / (d as f64).sqrt(); d];
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(count);
    for k in 0..count {
        let mut v = gaussian_vec(rng, d, 1.0);
        project_out(&mut v, &ones);
        if k < d - 1 {
            for prev in &out {
                project_out(&mut v, prev);
            }
        }
        normalize(&mut v);
        out.push(v);
    }
    out
}

fn basis(rng: &mut ChaCha8Rng, config: &ModelConfig) -> Basis {
    let v = config.vocab_size;
    let mut dirs = random_directions(rng, config.hidden_dim, v + 5);
    let pad = dirs.pop().unwrap();
    let con = dirs.pop().unwrap();
    let txt = dirs.pop().unwrap();
    let vis = dirs.pop().unwrap();
    let one = dirs.pop().unwrap();
    Basis {
        content: dirs,
        one,
        vis,
        txt,
        con,
        pad,
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

/// `m += scale * u v^T`
fn add_outer(m: &mut Matrix, scale: f64, u: &[f64], v: &[f64]) {
    for (r, ur) in u.iter().enumerate() {
        if *ur == 0.0 {
            continue;
        }
        let row = m.row_mut(r);
        axpy(row, scale * ur, v);
    }
}

fn perturbed(rng: &mut ChaCha8Rng, mut m: Matrix, std: f64) -> Matrix {
    let scale = std / (m.cols() as f64).sqrt();
    for x in m.data_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *x += z * scale;
    }
    m
}

/// Builds the constructed weights. Bit-identical for equal configs.
pub fn build_model(config: &ModelConfig) -> Result<ModelWeights> {
    config.validate()?;
    let p = &config.construction;
    let d = config.hidden_dim;
    let v = config.vocab_size;
    let vocab = &config.vocab;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let b = basis(&mut rng, config);

    let prior_sum = {
        let mut acc = vec![0.0; d];
        for id in vocab.priors() {
            axpy(&mut acc, 1.0, &b.content[id]);
        }
        acc
    };

    let mut visual_codebook = Matrix::zeros(v, d);
    let mut embedding = Matrix::zeros(v, d);
    for id in 0..v {
        let vrow = visual_codebook.row_mut(id);
        axpy(vrow, p.embed_scale, &b.content[id]);
        axpy(vrow, 1.0, &b.one);
        let row = embedding.row_mut(id);
        axpy(row, p.embed_scale, &b.content[id]);
        axpy(row, 1.0, &b.one);
        if vocab.is_concept(id) {
            axpy(row, 1.0, &b.con);
        } else {
            axpy(row, 1.0, &b.txt);
        }
    }
    let embedding = perturbed(&mut rng, embedding, p.weight_noise);
    let visual_codebook = perturbed(&mut rng, visual_codebook, p.weight_noise);

    let mut positions = Matrix::zeros(config.max_positions, d);
    for pos in 0..config.max_positions {
        let noise = gaussian_vec(&mut rng, d, p.position_noise / (d as f64).sqrt());
        let row = positions.row_mut(pos);
        axpy(row, 1.0, &noise);
        if pos < config.n_visual_tokens {
            axpy(row, p.visual_marker, &b.vis);
        }
    }

    let mut padding = b.one.clone();
    axpy(&mut padding, 1.0, &b.pad);

    let hd = config.head_dim();
    let key_dir = {
        let mut k = vec![0.0; d];
        axpy(&mut k, p.key_visual, &b.vis);
        axpy(&mut k, p.key_text, &b.txt);
        axpy(&mut k, p.key_concept, &b.con);
        axpy(&mut k, p.key_padding, &b.pad);
        k
    };
    let mlp_hidden = p.mlp_ratio * d;

    let mut layers = Vec::with_capacity(config.n_layers);
    for layer in 0..config.n_layers {
        let mut wq = Matrix::zeros(d, d);
        let mut wk = Matrix::zeros(d, d);
        for h in 0..config.n_heads {
            let mut slot = vec![0.0; d];
            slot[h * hd] = 1.0;
            add_outer(&mut wq, p.query_gain, &slot, &b.one);
            add_outer(&mut wk, 1.0, &slot, &key_dir);
        }
        let wq = perturbed(&mut rng, wq, p.weight_noise);
        let wk = perturbed(&mut rng, wk, p.weight_noise);
        let wv = perturbed(&mut rng, Matrix::identity(d), p.weight_noise);
        let mut wo = Matrix::identity(d);
        wo.data_mut().iter_mut().for_each(|x| *x *= p.output_scale);
        let wo = perturbed(&mut rng, wo, p.weight_noise);

        let mut w1 = Matrix::zeros(mlp_hidden, d);
        let mut b1 = vec![0.0; mlp_hidden];
        let mut w2 = Matrix::zeros(d, mlp_hidden);
        if layer == 0 {
            let in_scale = 1.0 / (d as f64).sqrt();
            for (unit, id) in (0..v).enumerate().take(mlp_hidden) {
                let row = w1.row_mut(unit);
                axpy(row, in_scale, &b.content[id]);
                axpy(row, p.inhibition_flag_gate * in_scale, &b.txt);
                axpy(row, p.inhibition_flag_gate * in_scale, &b.con);
                b1[unit] = -p.inhibition_threshold;
                let cue = if vocab.input_prompt.contains(&id) {
                    p.prompt_prior_cue
                } else if vocab.system_prompt.contains(&id) {
                    p.system_prior_cue
                } else {
                    0.0
                };
                for (r, (&s, &c)) in prior_sum.iter().zip(&b.content[id]).enumerate() {
                    w2.set(r, unit, cue * s - p.inhibition * c);
                }
            }
        }
        let w1 = perturbed(&mut rng, w1, p.weight_noise);
        let w2 = perturbed(&mut rng, w2, p.weight_noise);

        layers.push(LayerWeights {
            ln1_gain: vec![1.0; d],
            ln1_bias: vec![0.0; d],
            wq,
            wk,
            wv,
            wo,
            ln2_gain: vec![1.0; d],
            ln2_bias: vec![0.0; d],
            w1,
            b1,
            w2,
            b2: vec![0.0; d],
        });
    }

    let mut prior_bias = vec![0.0; v];
    for id in vocab.priors() {
        prior_bias[id] = p.prior_bias;
    }

    Ok(ModelWeights {
        embedding,
        visual_codebook,
        positions,
        padding,
        layers,
        final_gain: vec![p.final_gain; d],
        final_bias: vec![0.0; d],
        prior_bias,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let cfg = ModelConfig::default();
        let a = build_model(&cfg).unwrap();
        let b = build_model(&cfg).unwrap();
        assert_eq!(a, b);
        let c = build_model(&ModelConfig { seed: 2, ..cfg.clone() }).unwrap();
        let a1 = build_model(&ModelConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a1.embedding, c.embedding);
    }

    #[test]
    fn directions_are_orthonormal_and_mean_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dirs = random_directions(&mut rng, 16, 10);
        for (i, a) in dirs.iter().enumerate() {
            assert!(a.iter().sum::<f64>().abs() < 1e-12);
            for (j, b) in dirs.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot(a, b) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn small_hidden_dim_still_builds() {
        let cfg = ModelConfig {
            hidden_dim: 32,
            n_heads: 4,
            ..ModelConfig::default()
        };
        let w = build_model(&cfg).unwrap();
        assert_eq!(w.embedding.cols(), 32);
        assert!(w.embedding.data().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn prior_bias_on_prior_ids_only() {
        let cfg = ModelConfig::default();
        let w = build_model(&cfg).unwrap();
        for id in 0..cfg.vocab_size {
            let expect = if cfg.vocab.is_prior(id) {
                cfg.construction.prior_bias
            } else {
                0.0
            };
            assert_eq!(w.prior_bias[id], expect);
        }
    }
}
