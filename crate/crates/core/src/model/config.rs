use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type TokenId = usize;

/// Partition of the vocabulary into function tokens and concept tokens.
///
/// Concept ids form the contiguous range `concept_start..concept_start + n_concepts`;
/// the first `n_prior` concepts are the "prior" tokens that the LM-head bias and
/// the prompt cues push towards. Every id outside the concept range is a
/// function token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VocabLayout {
    pub eos: TokenId,
    /// Token fed at the first decode position (start of the response).
    pub response_start: TokenId,
    pub system_prompt: Vec<TokenId>,
    pub input_prompt: Vec<TokenId>,
    pub concept_start: TokenId,
    pub n_concepts: usize,
    pub n_prior: usize,
}

impl VocabLayout {
    pub fn concepts(&self) -> std::ops::Range<TokenId> {
        self.concept_start..self.concept_start + self.n_concepts
    }

    pub fn priors(&self) -> std::ops::Range<TokenId> {
        self.concept_start..self.concept_start + self.n_prior
    }

    pub fn is_concept(&self, id: TokenId) -> bool {
        self.concepts().contains(&id)
    }

    pub fn is_prior(&self, id: TokenId) -> bool {
        self.priors().contains(&id)
    }

    pub fn is_function(&self, id: TokenId) -> bool {
        !self.is_concept(id)
    }

    fn validate(&self, vocab_size: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_concepts == 0 {
            return bad("vocabulary needs at least one concept id".into());
        }
        if self.concept_start + self.n_concepts > vocab_size {
            return bad(format!(
                "concept range {}..{} exceeds vocab size {vocab_size}",
                self.concept_start,
                self.concept_start + self.n_concepts
            ));
        }
        if self.n_prior > self.n_concepts {
            return bad("n_prior cannot exceed n_concepts".into());
        }
        let reserved = [self.eos, self.response_start]
            .into_iter()
            .chain(self.system_prompt.iter().copied())
            .chain(self.input_prompt.iter().copied());
        for id in reserved {
            if id >= vocab_size {
                return bad(format!("token id {id} out of range for vocab size {vocab_size}"));
            }
            if self.is_concept(id) {
                return bad(format!("reserved token {id} overlaps the concept range"));
            }
        }
        Ok(())
    }
}

impl Default for VocabLayout {
    fn default() -> Self {
        Self {
            eos: 0,
            response_start: 6,
            system_prompt: vec![1, 2],
            input_prompt: vec![3, 4, 5],
            concept_start: 16,
            n_concepts: 16,
            n_prior: 8,
        }
    }
}

/// Scalars that shape the constructed weights.
///
/// The defaults are the desk-scale testbed operating point. Every field is a
/// plain multiplier on one structural component of the network, so the
/// behaviour can be probed one knob at a time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstructionParams {
    /// Norm of the token-identity component of each embedding row.
    pub embed_scale: f64,
    /// Std of the seeded Gaussian perturbation added to every weight matrix.
    pub weight_noise: f64,
    /// Std of the seeded learned-position component.
    pub position_noise: f64,
    /// Strength of the positional marker carried by visual slots.
    pub visual_marker: f64,
    /// Query gain of every attention head.
    pub query_gain: f64,
    /// Key affinity of the visual-slot marker.
    pub key_visual: f64,
    /// Key affinity of function (text) tokens.
    pub key_text: f64,
    /// Key affinity of concept tokens.
    pub key_concept: f64,
    /// Key affinity of padding slots.
    pub key_padding: f64,
    /// Scale of the attention output projection.
    pub output_scale: f64,
    /// Magnitude the first-layer MLP writes against a text position's own
    /// token direction.
    pub inhibition: f64,
    /// Activation threshold of the inhibition units.
    pub inhibition_threshold: f64,
    /// Weight of the text/concept flags in the inhibition units, so they fire
    /// at text positions only.
    pub inhibition_flag_gate: f64,
    /// Logit bonus on prior ids, added to decode-step logits.
    pub prior_bias: f64,
    /// Prior directions written by the first-layer MLP at input-prompt
    /// positions (per unit of activation).
    pub prompt_prior_cue: f64,
    /// Same association for system-prompt tokens.
    pub system_prior_cue: f64,
    /// Gain of the final layer norm (sets the logit temperature).
    pub final_gain: f64,
    /// Default std of the noise added to visual encodings.
    pub encode_noise: f64,
    /// Hidden width of each MLP as a multiple of `hidden_dim`.
    pub mlp_ratio: usize,
}

impl Default for ConstructionParams {
    fn default() -> Self {
        Self {
            embed_scale: 3.0,
            weight_noise: 0.02,
            position_noise: 0.1,
            visual_marker: 1.0,
            query_gain: 1.0,
            key_visual: 2.0,
            key_text: 1.5,
            key_concept: 2.0,
            key_padding: -3.0,
            output_scale: 0.5,
            inhibition: 16.0,
            inhibition_threshold: 1.2,
            inhibition_flag_gate: 3.0,
            prior_bias: 4.0,
            prompt_prior_cue: 2.0,
            system_prior_cue: 1.0,
            final_gain: 1.0,
            encode_noise: 0.3,
            mlp_ratio: 2,
        }
    }
}

/// Shape and seed of the toy decoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub hidden_dim: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub n_visual_tokens: usize,
    /// Length of the learned absolute position table.
    pub max_positions: usize,
    pub seed: u64,
    pub vocab: VocabLayout,
    pub construction: ConstructionParams,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            vocab_size: 64,
            hidden_dim: 96,
            n_layers: 4,
            n_heads: 4,
            n_visual_tokens: 8,
            max_positions: 64,
            seed: 0,
            vocab: VocabLayout::default(),
            construction: ConstructionParams::default(),
        }
    }
}

impl ModelConfig {
    pub fn head_dim(&self) -> usize {
        self.hidden_dim / self.n_heads
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.vocab_size < 4 {
            return bad("vocab_size must be at least 4");
        }
        if self.n_heads == 0 || self.hidden_dim == 0 || !self.hidden_dim.is_multiple_of(self.n_heads) {
            return bad("hidden_dim must be a positive multiple of n_heads");
        }
        if self.n_layers == 0 {
            return bad("n_layers must be at least 1");
        }
        if self.n_visual_tokens == 0 {
            return bad("n_visual_tokens must be at least 1");
        }
        let prompt = self.n_visual_tokens
            + self.vocab.system_prompt.len()
            + self.vocab.input_prompt.len();
        if self.max_positions <= prompt {
            return bad("max_positions must leave room after the prompt");
        }
        if self.construction.mlp_ratio == 0 {
            return bad("mlp_ratio must be at least 1");
        }
        self.vocab.validate(self.vocab_size)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        let cfg = ModelConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.head_dim(), 24);
    }

    #[test]
    fn head_dim_arithmetic() {
        let cfg = ModelConfig {
            hidden_dim: 32,
            n_heads: 4,
            ..ModelConfig::default()
        };
        assert_eq!(cfg.head_dim(), 8);
    }

    #[test]
    fn rejects_bad_shapes() {
        let base = ModelConfig::default();
        for cfg in [
            ModelConfig { vocab_size: 3, ..base.clone() },
            ModelConfig { hidden_dim: 30, n_heads: 4, ..base.clone() },
            ModelConfig { n_layers: 0, ..base.clone() },
            ModelConfig { n_visual_tokens: 0, ..base.clone() },
        ] {
            assert!(matches!(cfg.validate(), Err(Error::Config(_))), "{cfg:?}");
        }
    }

    #[test]
    fn rejects_reserved_token_in_concept_range() {
        let mut cfg = ModelConfig::default();
        cfg.vocab.eos = 20;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn vocab_partition() {
        let v = VocabLayout::default();
        assert!(v.is_prior(16) && v.is_concept(16));
        assert!(!v.is_prior(24) && v.is_concept(24));
        assert!(v.is_function(0) && v.is_function(40));
    }
}
