use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, TokenId};
use super::weights::ModelWeights;
use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Stand-in for an input image: the set of concepts that are actually present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticImage {
    grounded_concepts: BTreeSet<TokenId>,
}

impl SyntheticImage {
    pub fn new(concepts: impl IntoIterator<Item = TokenId>, config: &ModelConfig) -> Result<Self> {
        let grounded_concepts: BTreeSet<TokenId> = concepts.into_iter().collect();
        if grounded_concepts.is_empty() {
            return Err(Error::InvalidInput("image must contain at least one concept".into()));
        }
        for &id in &grounded_concepts {
            if id >= config.vocab_size {
                return Err(Error::InvalidInput(format!("concept id {id} out of vocabulary")));
            }
            if !config.vocab.is_concept(id) {
                return Err(Error::InvalidInput(format!(
                    "token {id} is a function token, not a concept"
                )));
            }
        }
        Ok(Self { grounded_concepts })
    }

    pub fn grounded(&self) -> &BTreeSet<TokenId> {
        &self.grounded_concepts
    }

    pub fn contains(&self, id: TokenId) -> bool {
        self.grounded_concepts.contains(&id)
    }
}

/// Mixes the model seed with a concept id so each concept gets its own noise stream.
fn concept_seed(seed: u64, concept: TokenId) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((concept as u64 + 1) << 17) ^ 0x5eed
}

/// Visual encoder: slot `i` carries the codebook row of the `i`-th grounded
/// concept (ascending id order) plus seeded noise; remaining slots carry the
/// padding embedding. Uses the config's default noise level.
pub fn encode_image(image: &SyntheticImage, weights: &ModelWeights, config: &ModelConfig) -> Result<Matrix> {
    encode_image_with_noise(image, weights, config, config.construction.encode_noise)
}

pub fn encode_image_with_noise(
    image: &SyntheticImage,
    weights: &ModelWeights,
    config: &ModelConfig,
    noise_std: f64,
) -> Result<Matrix> {
    let slots = config.n_visual_tokens;
    let n = image.grounded_concepts.len();
    if n > slots {
        return Err(Error::Capacity { concepts: n, slots });
    }
    let d = config.hidden_dim;
    let mut out = Matrix::zeros(slots, d);
    for (slot, &concept) in image.grounded_concepts.iter().enumerate() {
        let row = out.row_mut(slot);
        row.copy_from_slice(weights.visual_codebook.row(concept));
        if noise_std > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(concept_seed(config.seed, concept));
            let scale = noise_std / (d as f64).sqrt();
            for x in row.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *x += z * scale;
            }
        }
    }
    for slot in n..slots {
        out.row_mut(slot).copy_from_slice(&weights.padding);
    }
    Ok(out)
}
