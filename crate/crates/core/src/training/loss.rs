//! Ranking and aspect losses with their derivatives.

use crate::error::{Error, Result};
use crate::graph::AspectId;

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Pairwise BPR loss `-ln σ(s_pos - s_neg)`.
pub fn bpr_loss(s_pos: f64, s_neg: f64) -> f64 {
    softplus(-(s_pos - s_neg))
}

/// Derivative of [`bpr_loss`] with respect to `s_pos`; the derivative with
/// respect to `s_neg` is its negation.
pub fn bpr_grad(s_pos: f64, s_neg: f64) -> f64 {
    -sigmoid(-(s_pos - s_neg))
}

fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|l| (l - lse).exp()).collect()
}

/// Cross-entropy `-ln softmax(logits)[true_aspect]`.
pub fn aspect_ce_loss(logits: &[f64], true_aspect: AspectId) -> Result<f64> {
    let target = logits
        .get(true_aspect.0)
        .ok_or_else(|| Error::UnknownAspect(format!("{} of {}", true_aspect, logits.len())))?;
    Ok(log_sum_exp(logits) - target)
}

/// Gradient of [`aspect_ce_loss`] with respect to the logits.
pub fn aspect_ce_grad(logits: &[f64], true_aspect: AspectId) -> Vec<f64> {
    let mut g = softmax(logits);
    g[true_aspect.0] -= 1.0;
    g
}

pub fn total_loss(rank: f64, aspect: f64, lambda: f64) -> f64 {
    rank + lambda * aspect
}
