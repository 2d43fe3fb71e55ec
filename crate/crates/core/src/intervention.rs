//! Pre-softmax attention score modulation: multiplicative boosting of visual
//! keys and division of text keys, gated by a half-open layer range.
//!
//! Scores are scaled as-is, sign included. A negative visual score becomes
//! more negative under a boost factor above one, which lowers that key's
//! weight. Mass monotonicity therefore only holds for rows whose modulated
//! scores are non-negative.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Segment, SegmentMap};

/// Which text positions the suppression divides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuppressionScope {
    /// System prompt, text input and generated output.
    AllText,
    TextOutputOnly,
    SystemPromptOnly,
    #[default]
    TextInputOnly,
    None,
}

impl SuppressionScope {
    pub fn selects(self, segment: Segment) -> bool {
        match self {
            SuppressionScope::AllText => segment != Segment::Visual,
            SuppressionScope::TextOutputOnly => segment == Segment::Generated,
            SuppressionScope::SystemPromptOnly => segment == Segment::SystemPrompt,
            SuppressionScope::TextInputOnly => segment == Segment::TextInput,
            SuppressionScope::None => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterventionConfig {
    /// Weight of normalized entropy against `1 - grounding` in the risk signal.
    pub alpha: f64,
    /// Risk scale: the signal value at which risk saturates at 1.
    pub gamma: f64,
    pub m_vis_max: f64,
    pub m_txt_max: f64,
    pub layer_start: usize,
    pub layer_end: usize,
    #[serde(default)]
    pub scope: SuppressionScope,
}

impl InterventionConfig {
    pub fn validate(&self, n_layers: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.m_vis_max >= 1.0 && self.m_vis_max.is_finite()) {
            return bad(format!("m_vis_max must be >= 1, got {}", self.m_vis_max));
        }
        if !(self.m_txt_max >= 1.0 && self.m_txt_max.is_finite()) {
            return bad(format!("m_txt_max must be >= 1, got {}", self.m_txt_max));
        }
        if self.layer_start >= self.layer_end {
            return bad(format!(
                "layer range [{}, {}) is empty",
                self.layer_start, self.layer_end
            ));
        }
        if self.layer_end > n_layers {
            return bad(format!(
                "layer_end {} exceeds the model's {n_layers} layers",
                self.layer_end
            ));
        }
        Ok(())
    }

    pub fn in_range(&self, layer: usize) -> bool {
        (self.layer_start..self.layer_end).contains(&layer)
    }

    /// Both factors at 1: the intervention is the identity.
    pub fn is_noop(&self) -> bool {
        self.m_vis_max == 1.0 && self.m_txt_max == 1.0
    }

    /// Operating point used for the LLaVA-style desk runs.
    pub fn llava_style(n_layers: usize) -> Self {
        Self {
            alpha: 0.5,
            gamma: 0.5,
            m_vis_max: 1.1,
            m_txt_max: 1.7,
            layer_start: 0,
            layer_end: n_layers,
            scope: SuppressionScope::TextInputOnly,
        }
    }
}

/// One layer's pre-softmax scores for the current query, one entry per key.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub layer: usize,
    pub scores: Vec<f64>,
}

pub fn boost_visual_in_place(scores: &mut [f64], segments: &SegmentMap, m_t: f64) {
    for (s, seg) in scores.iter_mut().zip(segments.labels()) {
        if *seg == Segment::Visual {
            *s *= m_t;
        }
    }
}

pub fn suppress_text_in_place(
    scores: &mut [f64],
    segments: &SegmentMap,
    m_txt_max: f64,
    scope: SuppressionScope,
) {
    if scope == SuppressionScope::None {
        return;
    }
    for (s, seg) in scores.iter_mut().zip(segments.labels()) {
        if scope.selects(*seg) {
            *s /= m_txt_max;
        }
    }
}

/// Boost then suppress, only inside `[layer_start, layer_end)`.
pub fn apply_in_place(
    scores: &mut [f64],
    layer: usize,
    segments: &SegmentMap,
    cfg: &InterventionConfig,
    m_t: f64,
) {
    if !cfg.in_range(layer) {
        return;
    }
    boost_visual_in_place(scores, segments, m_t);
    suppress_text_in_place(scores, segments, cfg.m_txt_max, cfg.scope);
}

pub fn boost_visual(row: &ScoreRow, segments: &SegmentMap, m_t: f64) -> ScoreRow {
    let mut out = row.clone();
    boost_visual_in_place(&mut out.scores, segments, m_t);
    out
}

pub fn suppress_text(
    row: &ScoreRow,
    segments: &SegmentMap,
    m_txt_max: f64,
    scope: SuppressionScope,
) -> ScoreRow {
    let mut out = row.clone();
    suppress_text_in_place(&mut out.scores, segments, m_txt_max, scope);
    out
}

pub fn apply(row: &ScoreRow, segments: &SegmentMap, cfg: &InterventionConfig, m_t: f64) -> ScoreRow {
    let mut out = row.clone();
    apply_in_place(&mut out.scores, row.layer, segments, cfg, m_t);
    out
}
