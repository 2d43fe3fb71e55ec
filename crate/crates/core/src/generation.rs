//! The decode loop: prefill once, build the grounding vector, then per step
//! apply the boost implied by the previous step's risk, pick a token and
//! update the risk.

use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intervention::{apply_in_place, boost_visual_in_place, InterventionConfig};
use crate::model::{
    decode_step, encode_image, prefill, DecodeState, Identity, ModelConfig, ModelWeights,
    ScoreModulator, SegmentMap, SyntheticImage, TokenId,
};
use crate::risk::{boost_strength, grounding_vector, readout, GroundingVector, RiskParams};
use crate::tensor::ProbVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mode {
    Vanilla,
    /// Uniform visual boost at every layer and step, no risk feedback.
    FixedBoost { factor: f64 },
    #[serde(rename = "adavboost")]
    AdaVBoost(InterventionConfig),
}

impl Mode {
    pub fn label(&self) -> String {
        match self {
            Mode::Vanilla => "vanilla".into(),
            Mode::FixedBoost { factor } => format!("fixed_boost_{factor}"),
            Mode::AdaVBoost(_) => "adavboost".into(),
        }
    }

    pub fn validate(&self, config: &ModelConfig) -> Result<()> {
        match self {
            Mode::Vanilla => Ok(()),
            Mode::FixedBoost { factor } if *factor >= 1.0 && factor.is_finite() => Ok(()),
            Mode::FixedBoost { factor } => {
                Err(Error::Config(format!("fixed boost factor must be >= 1, got {factor}")))
            }
            Mode::AdaVBoost(cfg) => cfg.validate(config.n_layers),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Decoding {
    #[default]
    Greedy,
    Sample { seed: u64, temperature: f64 },
}

#[derive(Debug, Clone)]
pub struct GenerationRequest {
    pub image: SyntheticImage,
    pub system_tokens: Vec<TokenId>,
    pub input_tokens: Vec<TokenId>,
    pub max_new_tokens: usize,
    pub mode: Mode,
    pub decoding: Decoding,
    /// Risk parameters used to fill trace fields in modes that do not act on
    /// risk (vanilla, fixed boost). AdaVBoost uses its own config.
    pub trace_risk: RiskParams,
}

impl GenerationRequest {
    /// Request with the model's default prompt template and greedy decoding.
    pub fn new(image: SyntheticImage, config: &ModelConfig, mode: Mode, max_new_tokens: usize) -> Self {
        Self {
            image,
            system_tokens: config.vocab.system_prompt.clone(),
            input_tokens: config.vocab.input_prompt.clone(),
            max_new_tokens,
            mode,
            decoding: Decoding::Greedy,
            trace_risk: DEFAULT_TRACE_RISK,
        }
    }
}

pub const DEFAULT_TRACE_RISK: RiskParams = RiskParams {
    alpha: 0.5,
    gamma: 0.5,
    m_vis_max: 1.1,
};

/// One generated token. Field names are the JSON-Lines trace schema.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    pub step: usize,
    pub token: TokenId,
    pub h_bar: f64,
    /// Grounding of the step's argmax token.
    pub g: f64,
    pub vge: f64,
    pub r: f64,
    /// Visual boost factor applied while producing this token.
    pub m: f64,
}

pub type TokenTrace = Vec<TraceRecord>;

#[derive(Debug, Clone)]
pub struct GenerationResult {
    pub tokens: Vec<TokenId>,
    pub trace: TokenTrace,
    pub grounding: GroundingVector,
    pub duration: Duration,
    pub prefill_duration: Duration,
}

impl GenerationResult {
    /// Decode-phase wall time per generated token.
    pub fn per_token(&self) -> Duration {
        let decode = self.duration.saturating_sub(self.prefill_duration);
        decode / self.tokens.len().max(1) as u32
    }
}

struct Adaptive<'a> {
    cfg: &'a InterventionConfig,
    m_t: f64,
}

impl ScoreModulator for Adaptive<'_> {
    #[inline]
    fn modulate(&mut self, layer: usize, _head: usize, scores: &mut [f64], segments: &SegmentMap) {
        apply_in_place(scores, layer, segments, self.cfg, self.m_t);
    }
}

struct Fixed(f64);

impl ScoreModulator for Fixed {
    #[inline]
    fn modulate(&mut self, _layer: usize, _head: usize, scores: &mut [f64], segments: &SegmentMap) {
        boost_visual_in_place(scores, segments, self.0);
    }
}

/// Greedy: argmax, lowest index on ties. Sample: inverse-CDF draw from
/// `p^(1/T)` renormalized.
pub fn select_token(p: &ProbVector, decoding: Decoding, rng: &mut impl Rng) -> Result<TokenId> {
    match decoding {
        Decoding::Greedy => Ok(p.argmax()),
        Decoding::Sample { temperature, .. } => {
            if !(temperature > 0.0 && temperature.is_finite()) {
                return Err(Error::Config(format!(
                    "sampling temperature must be positive, got {temperature}"
                )));
            }
            let weights: Vec<f64> = p.values().iter().map(|x| x.powf(1.0 / temperature)).collect();
            let total: f64 = weights.iter().sum();
            let u: f64 = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut last_nonzero = 0;
            for (i, w) in weights.iter().enumerate() {
                if *w > 0.0 {
                    last_nonzero = i;
                }
                acc += w;
                if u < acc {
                    return Ok(i);
                }
            }
            Ok(last_nonzero)
        }
    }
}

fn risk_params(request: &GenerationRequest) -> RiskParams {
    match &request.mode {
        Mode::AdaVBoost(cfg) => RiskParams {
            alpha: cfg.alpha,
            gamma: cfg.gamma,
            m_vis_max: cfg.m_vis_max,
        },
        _ => request.trace_risk,
    }
}

pub fn generate(
    request: &GenerationRequest,
    weights: &ModelWeights,
    config: &ModelConfig,
) -> Result<GenerationResult> {
    if request.max_new_tokens == 0 {
        return Err(Error::Config("max_new_tokens must be at least 1".into()));
    }
    request.mode.validate(config)?;
    let params = risk_params(request);
    if params.gamma.is_nan() || params.gamma <= 0.0 {
        return Err(Error::Config("trace risk scale must be positive".into()));
    }

    let start = Instant::now();
    let visual = encode_image(&request.image, weights, config)?;
    let pf = prefill(
        weights,
        config,
        &visual,
        &request.system_tokens,
        &request.input_tokens,
    )?;
    let grounding = grounding_vector(&pf.visual_logits)?;
    let mut state: DecodeState = pf.state;
    if let Decoding::Sample { seed, .. } = request.decoding {
        state.seed_rng(seed);
    }
    let prefill_duration = start.elapsed();

    let mut tokens = Vec::with_capacity(request.max_new_tokens);
    let mut trace = Vec::with_capacity(request.max_new_tokens);
    for step in 1..=request.max_new_tokens {
        let (step_out, m_t) = match &request.mode {
            Mode::Vanilla => (decode_step(&mut state, weights, config, &mut Identity)?, 1.0),
            Mode::FixedBoost { factor } => (
                decode_step(&mut state, weights, config, &mut Fixed(*factor))?,
                *factor,
            ),
            Mode::AdaVBoost(cfg) => {
                let m_t = boost_strength(state.r_prev, cfg.m_vis_max);
                let mut modulator = Adaptive { cfg, m_t };
                (decode_step(&mut state, weights, config, &mut modulator)?, m_t)
            }
        };
        let token = select_token(&step_out.probs, request.decoding, &mut state.rng)?;
        let risk = readout(&step_out.probs, &step_out.logits, &grounding, params)?;
        state.r_prev = risk.r;
        trace.push(TraceRecord {
            step,
            token,
            h_bar: risk.h_bar,
            g: risk.g_t,
            vge: risk.vge,
            r: risk.r,
            m: m_t,
        });
        tokens.push(token);
        if token == config.vocab.eos {
            break;
        }
        state.feed(token);
    }

    Ok(GenerationResult {
        tokens,
        trace,
        grounding,
        duration: start.elapsed(),
        prefill_duration,
    })
}

/// Checks that each recorded boost factor follows from the previous step's
/// risk: `m_1 = 1`, `m_t = boost_strength(r_{t-1})`, compared exactly.
pub fn check_lag_invariant(trace: &[TraceRecord], m_vis_max: f64) -> std::result::Result<(), String> {
    let mut r_prev = 0.0;
    for rec in trace {
        let expect = boost_strength(r_prev, m_vis_max);
        if rec.m != expect {
            return Err(format!(
                "step {}: recorded m = {} but previous risk {} implies {}",
                rec.step, rec.m, r_prev, expect
            ));
        }
        r_prev = rec.r;
    }
    Ok(())
}
