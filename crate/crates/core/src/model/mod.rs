//! Desk-scale decoder-only multimodal model with constructed weights.

mod config;
mod forward;
mod image;
mod segments;
pub mod snapshot;
mod weights;

pub use config::{ConstructionParams, ModelConfig, TokenId, VocabLayout};
pub use forward::{
    decode_step, full_sequence_logits, lm_head, prefill, DecodeState, Identity, LayerCache,
    Prefill, ScoreModulator, StepLogits,
};
pub use image::{encode_image, encode_image_with_noise, SyntheticImage};
pub use segments::{Segment, SegmentMap};
pub use weights::{build_model, LayerWeights, ModelWeights, LN_EPS};
