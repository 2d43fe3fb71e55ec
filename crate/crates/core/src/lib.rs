//! Token-level adaptive visual attention boosting for a desk-scale
//! multimodal decoder.
//!
//! The crate pairs a small decoder-only transformer whose constructed weights
//! make visual attention carry grounding evidence with an intervention layer
//! that, at every decode step, estimates hallucination risk from the previous
//! token (normalized entropy blended with a prefill-time grounding score) and
//! scales pre-softmax attention scores accordingly: visual keys are boosted in
//! proportion to risk and text keys are divided by a constant factor.
//!
//! * [`tensor`]: f64 kernels (softmax, layer norm, matmul).
//! * [`model`]: the toy decoder, KV cache, visual encoder, weight snapshots.
//! * [`intervention`]: score-row modulation.
//! * [`risk`]: grounding vector, entropy, risk and boost strength.
//! * [`generation`]: the decode loop and its baselines.
//! * [`testbed`]: synthetic episodes with exact hallucination labels.
//! * [`experiment`]: config files, trace export, comparisons, sweeps, checks.

pub mod error;
pub mod experiment;
pub mod generation;
pub mod intervention;
pub mod model;
pub mod risk;
pub mod tensor;
pub mod testbed;

pub use error::{Error, Result};
