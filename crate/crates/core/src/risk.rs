//! Token-level hallucination risk: a grounding vector read off the prefill
//! pass, normalized predictive entropy, their convex combination, and the
//! mapping from risk to a visual boost factor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{argmax, softmax, xlogx, ProbVector};

/// Per-vocabulary maximum of the softmaxed LM-head outputs over visual slots.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundingVector(Vec<f64>);

impl GroundingVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, token: usize) -> f64 {
        self.0[token]
    }
}

/// `G[v] = max_i softmax(h_i)[v]` over the visual positions `i`.
pub fn grounding_vector(visual_logits: &[Vec<f64>]) -> Result<GroundingVector> {
    let first = visual_logits
        .first()
        .ok_or_else(|| Error::Precondition("grounding vector needs at least one visual position".into()))?;
    let mut g = softmax(first)?.into_inner();
    for logits in &visual_logits[1..] {
        if logits.len() != g.len() {
            return Err(Error::Shape("visual logits differ in length".into()));
        }
        let p = softmax(logits)?;
        for (gv, pv) in g.iter_mut().zip(p.values()) {
            *gv = gv.max(*pv);
        }
    }
    Ok(GroundingVector(g))
}

/// Entropy of `p` divided by `ln V`, in `[0, 1]`.
pub fn normalized_entropy(p: &ProbVector) -> Result<f64> {
    let v = p.len();
    if v < 2 {
        return Err(Error::Precondition("normalized entropy needs V >= 2".into()));
    }
    let h = -p.values().iter().map(|&x| xlogx(x)).sum::<f64>();
    Ok((h / (v as f64).ln()).clamp(0.0, 1.0))
}

/// Grounding of the step's argmax token (lowest index on ties).
pub fn grounding_score(g: &GroundingVector, logits: &[f64]) -> Result<f64> {
    if logits.len() != g.len() {
        return Err(Error::Shape(format!(
            "logits have length {}, grounding vector {}",
            logits.len(),
            g.len()
        )));
    }
    Ok(g.0[argmax(logits)])
}

pub fn vge(h_bar: f64, g_t: f64, alpha: f64) -> f64 {
    alpha * h_bar + (1.0 - alpha) * (1.0 - g_t)
}

pub fn risk_score(vge: f64, gamma: f64) -> Result<f64> {
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(Error::Config(format!("risk scale must be positive, got {gamma}")));
    }
    Ok((vge / gamma).min(1.0))
}

/// `1 + (m_vis_max - 1) r`, evaluated in convex form so both endpoints are exact.
pub fn boost_strength(r: f64, m_vis_max: f64) -> f64 {
    r * m_vis_max + (1.0 - r)
}

/// Everything the risk pipeline derives from one decode step.
///
/// `m` is the boost strength implied by this step's risk, i.e. the factor the
/// *next* step applies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskReadout {
    pub h_bar: f64,
    pub g_t: f64,
    pub vge: f64,
    pub r: f64,
    pub m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskParams {
    pub alpha: f64,
    pub gamma: f64,
    pub m_vis_max: f64,
}

pub fn readout(
    probs: &ProbVector,
    logits: &[f64],
    grounding: &GroundingVector,
    params: RiskParams,
) -> Result<RiskReadout> {
    let h_bar = normalized_entropy(probs)?;
    let g_t = grounding_score(grounding, logits)?;
    let vge = vge(h_bar, g_t, params.alpha);
    let r = risk_score(vge, params.gamma)?;
    let m = boost_strength(r, params.m_vis_max);
    Ok(RiskReadout { h_bar, g_t, vge, r, m })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn logits_for(p: &[f64]) -> Vec<f64> {
        p.iter().map(|x| x.ln()).collect()
    }

    #[test]
    fn grounding_vector_elementwise_max() {
        let g = grounding_vector(&[logits_for(&[0.7, 0.3]), logits_for(&[0.2, 0.8])]).unwrap();
        assert_abs_diff_eq!(g.get(0), 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(g.get(1), 0.8, epsilon = 1e-12);
    }

    #[test]
    fn grounding_vector_single_and_permuted() {
        let h0 = vec![0.3, -1.0, 2.0];
        let h1 = vec![1.0, 1.5, -0.5];
        let single = grounding_vector(std::slice::from_ref(&h0)).unwrap();
        assert_eq!(single.values(), softmax(&h0).unwrap().values());
        let a = grounding_vector(&[h0.clone(), h1.clone()]).unwrap();
        let b = grounding_vector(&[h1, h0]).unwrap();
        assert_eq!(a, b);
        assert!(matches!(grounding_vector(&[]), Err(Error::Precondition(_))));
    }

    #[test]
    fn entropy_cases() {
        let uniform = ProbVector::new(vec![0.25; 4]).unwrap();
        assert_abs_diff_eq!(normalized_entropy(&uniform).unwrap(), 1.0, epsilon = 1e-12);
        let one_hot = ProbVector::new(vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(normalized_entropy(&one_hot).unwrap(), 0.0);
        let half = ProbVector::new(vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(normalized_entropy(&half).unwrap(), 0.5, epsilon = 1e-15);
        let single = ProbVector::new(vec![1.0]).unwrap();
        assert!(normalized_entropy(&single).is_err());
    }

    #[test]
    fn grounding_score_cases() {
        let g = GroundingVector(vec![0.2, 0.9, 0.5]);
        assert_eq!(grounding_score(&g, &[1.0, 3.0, 2.0]).unwrap(), 0.9);
        assert_eq!(grounding_score(&g, &[0.0, 0.0, 7.0]).unwrap(), 0.5);
        assert_eq!(grounding_score(&g, &[4.0, 4.0, 4.0]).unwrap(), 0.2);
        assert!(grounding_score(&g, &[1.0]).is_err());
    }

    #[test]
    fn vge_cases() {
        assert_eq!(vge(0.37, 0.8, 1.0), 0.37);
        assert_abs_diff_eq!(vge(0.37, 0.8, 0.0), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(vge(0.4, 0.9, 0.5), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn risk_cases() {
        assert_eq!(risk_score(0.0, 0.5).unwrap(), 0.0);
        assert_eq!(risk_score(0.7, 0.5).unwrap(), 1.0);
        assert_eq!(risk_score(0.5, 0.5).unwrap(), 1.0);
        assert_eq!(risk_score(0.25, 0.5).unwrap(), 0.5);
        assert!(matches!(risk_score(0.1, 0.0), Err(Error::Config(_))));
        assert!(risk_score(0.1, -1.0).is_err());
    }

    #[test]
    fn boost_cases() {
        assert_eq!(boost_strength(0.0, 1.7), 1.0);
        assert_eq!(boost_strength(1.0, 1.7), 1.7);
        assert_eq!(boost_strength(1.0, 3.3), 3.3);
        assert_abs_diff_eq!(boost_strength(0.5, 1.1), 1.05, epsilon = 1e-15);
    }
}
