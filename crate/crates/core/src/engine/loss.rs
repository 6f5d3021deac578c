//! Saliency losses: per-map binary cross-entropy and the weighted multi-map
//! combination used when several prediction maps share one ground truth.

use crate::engine::SaliencyMap;
use crate::error::{Error, Result};
use crate::mask::BinaryMask;

/// Probabilities are clipped to `[BCE_CLIP, 1 - BCE_CLIP]` before taking
/// logarithms.
pub const BCE_CLIP: f64 = 1e-7;

/// Mean binary cross-entropy of a predicted saliency map against a binary
/// ground truth: `−mean(g·ln p + (1−g)·ln(1−p))`.
pub fn bce_loss(pred: &SaliencyMap, truth: &BinaryMask) -> Result<f64> {
    if pred.width() != truth.width() || pred.height() != truth.height() {
        return Err(Error::dims(
            (truth.width(), truth.height()),
            (pred.width(), pred.height()),
        ));
    }
    let mut total = 0.0;
    for (&p, &g) in pred.probs().iter().zip(truth.bits()) {
        let p = p.clamp(BCE_CLIP, 1.0 - BCE_CLIP);
        total += if g { p.ln() } else { (1.0 - p).ln() };
    }
    Ok(-total / pred.probs().len() as f64)
}

/// Weights for [`fused_loss`]: one per side-output map plus one for the fused
/// map. All weights default to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct LossWeights {
    pub side_weights: Vec<f64>,
    pub fuse_weight: f64,
}

impl LossWeights {
    /// Uniform unit weights for `side_count` side outputs.
    pub fn uniform(side_count: usize) -> Self {
        LossWeights {
            side_weights: vec![1.0; side_count],
            fuse_weight: 1.0,
        }
    }

    fn validate(&self, side_count: usize) -> Result<()> {
        if self.side_weights.len() != side_count {
            return Err(Error::InvalidParameter(format!(
                "{} side weights for {side_count} side losses",
                self.side_weights.len()
            )));
        }
        if self
            .side_weights
            .iter()
            .chain(std::iter::once(&self.fuse_weight))
            .any(|w| !w.is_finite() || *w < 0.0)
        {
            return Err(Error::InvalidParameter(
                "loss weights must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Weighted sum of side-output losses plus the fused-map loss:
/// `Σ wᵢ·lᵢ + w_fuse·l_fuse`. Requires at least one side loss.
pub fn fused_loss(side_losses: &[f64], fuse: f64, weights: &LossWeights) -> Result<f64> {
    if side_losses.is_empty() {
        return Err(Error::Empty {
            what: "side loss list",
        });
    }
    weights.validate(side_losses.len())?;
    let mut total = 0.0;
    for (l, w) in side_losses.iter().zip(&weights.side_weights) {
        total += w * l;
    }
    Ok(total + weights.fuse_weight * fuse)
}
