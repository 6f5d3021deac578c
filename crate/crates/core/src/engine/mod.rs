//! Pseudo-label data engine: losses over saliency maps, evaluation metrics,
//! mask-quality scoring, and seeded augmentation.

mod augment;
mod loss;
mod metrics;
mod quality;

pub use augment::{augment_mixup, augment_noise};
pub use loss::{bce_loss, fused_loss, LossWeights, BCE_CLIP};
pub use metrics::{
    classification_metrics, confusion_matrix, regression_errors, ClassificationScores,
    ConfusionMatrix, MetricsReport,
};
pub use quality::{fit_scorer, filter_masks, mask_features, LinearScorer, QualityFeatures, ScoredMask};

use crate::error::{Error, Result};
use crate::image::{ColorMode, RasterImage};
use crate::mask::BinaryMask;

/// Per-pixel foreground probabilities in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    width: u32,
    height: u32,
    probs: Vec<f64>,
}

impl SaliencyMap {
    /// Wraps a probability buffer; every value must be finite and in `[0, 1]`.
    pub fn from_probs(width: u32, height: u32, probs: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "saliency dimensions must be positive, got {width}x{height}"
            )));
        }
        if probs.len() != (width as usize) * (height as usize) {
            return Err(Error::InvalidParameter(format!(
                "probability buffer has {} entries, geometry needs {}",
                probs.len(),
                (width as usize) * (height as usize)
            )));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
            return Err(Error::InvalidParameter(
                "saliency probabilities must lie in [0, 1]".into(),
            ));
        }
        Ok(SaliencyMap {
            width,
            height,
            probs,
        })
    }

    /// Hard 0/1 map from a binary mask.
    pub fn from_mask(mask: &BinaryMask) -> Self {
        SaliencyMap {
            width: mask.width(),
            height: mask.height(),
            probs: mask.bits().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }

    /// Soft map from a single-channel image, scaling samples by 1/255.
    pub fn from_raster(image: &RasterImage) -> Result<Self> {
        if image.mode() != ColorMode::Gray {
            return Err(Error::ChannelMismatch {
                expected: 1,
                got: image.mode().channels() as u8,
            });
        }
        Ok(SaliencyMap {
            width: image.width(),
            height: image.height(),
            probs: image.data().iter().map(|&v| v as f64 / 255.0).collect(),
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn same_size(&self, other: &SaliencyMap) -> bool {
        self.width == other.width && self.height == other.height
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_probs_validates() {
        assert!(SaliencyMap::from_probs(2, 2, vec![0.0, 0.5, 1.0, 0.25]).is_ok());
        assert!(SaliencyMap::from_probs(2, 2, vec![0.0; 3]).is_err());
        assert!(SaliencyMap::from_probs(2, 2, vec![0.0, 0.5, 1.0, 1.25]).is_err());
        assert!(SaliencyMap::from_probs(2, 2, vec![0.0, 0.5, 1.0, f64::NAN]).is_err());
        assert!(SaliencyMap::from_probs(0, 2, vec![]).is_err());
    }

    #[test]
    fn from_mask_is_hard() {
        let mut mask = BinaryMask::new(2, 1).unwrap();
        mask.set(1, 0, true);
        let map = SaliencyMap::from_mask(&mask);
        assert_eq!(map.probs(), &[0.0, 1.0]);
    }

    #[test]
    fn from_raster_scales() {
        let img = RasterImage::from_data(2, 1, ColorMode::Gray, vec![0, 255]).unwrap();
        let map = SaliencyMap::from_raster(&img).unwrap();
        assert_eq!(map.probs(), &[0.0, 1.0]);
        let img = RasterImage::from_data(1, 1, ColorMode::Gray, vec![51]).unwrap();
        let map = SaliencyMap::from_raster(&img).unwrap();
        assert!((map.probs()[0] - 0.2).abs() < 1e-12);
    }
}
