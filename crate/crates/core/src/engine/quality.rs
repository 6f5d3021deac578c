//! Mask-quality scoring: shape statistics per candidate mask, a ridge-fitted
//! linear scorer, and threshold filtering of candidate sets.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{bce_loss, SaliencyMap};
use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::morphology::boundary;

/// Shape and agreement statistics of one candidate mask.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityFeatures {
    /// Foreground fraction of the raster.
    pub fill_ratio: f64,
    /// Number of 8-connected foreground components.
    pub component_count: f64,
    /// Foreground area over its bounding-box area; 0 for an empty mask.
    pub solidity: f64,
    /// Perimeter squared over area; 0 for an empty mask.
    pub compactness: f64,
    /// Binary cross-entropy against the consensus saliency map.
    pub bce_vs_consensus: f64,
}

impl QualityFeatures {
    pub fn as_array(&self) -> [f64; 5] {
        [
            self.fill_ratio,
            self.component_count,
            self.solidity,
            self.compactness,
            self.bce_vs_consensus,
        ]
    }
}

/// Computes quality features for a candidate mask against a consensus map of
/// the same size.
pub fn mask_features(mask: &BinaryMask, consensus: &SaliencyMap) -> Result<QualityFeatures> {
    if mask.width() != consensus.width() || mask.height() != consensus.height() {
        return Err(Error::dims(
            (consensus.width(), consensus.height()),
            (mask.width(), mask.height()),
        ));
    }
    let area = mask.count_foreground();
    let fill_ratio = area as f64 / (mask.width() as f64 * mask.height() as f64);

    let (solidity, compactness) = if area == 0 {
        (0.0, 0.0)
    } else {
        let (l, t, r, b) = mask.bounding_box().expect("non-empty mask has a box");
        let bbox_area = ((r - l + 1) as f64) * ((b - t + 1) as f64);
        let perimeter = boundary(mask).count_foreground() as f64;
        (area as f64 / bbox_area, perimeter * perimeter / area as f64)
    };

    Ok(QualityFeatures {
        fill_ratio,
        component_count: component_count(mask) as f64,
        solidity,
        compactness,
        bce_vs_consensus: bce_loss(consensus, mask)?,
    })
}

/// Number of 8-connected foreground components.
pub fn component_count(mask: &BinaryMask) -> usize {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let mut seen = vec![false; (w * h) as usize];
    let mut components = 0;
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let idx = (y * w + x) as usize;
            if !mask.get(x, y) || seen[idx] {
                continue;
            }
            components += 1;
            seen[idx] = true;
            stack.push((x, y));
            while let Some((cx, cy)) = stack.pop() {
                for dy in -1..=1i64 {
                    for dx in -1..=1i64 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let (nx, ny) = (cx + dx, cy + dy);
                        if nx < 0 || ny < 0 || nx >= w || ny >= h {
                            continue;
                        }
                        let nidx = (ny * w + nx) as usize;
                        if mask.get(nx, ny) && !seen[nidx] {
                            seen[nidx] = true;
                            stack.push((nx, ny));
                        }
                    }
                }
            }
        }
    }
    components
}

/// Linear quality scorer: `score = clamp(w · features + bias, 0, 1)` with an
/// acceptance threshold `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearScorer {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub tau: f64,
}

impl LinearScorer {
    pub fn score(&self, features: &QualityFeatures) -> f64 {
        let x = features.as_array();
        let raw: f64 = self
            .weights
            .iter()
            .zip(x.iter())
            .map(|(w, v)| w * v)
            .sum::<f64>()
            + self.bias;
        raw.clamp(0.0, 1.0)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir).map_err(|e| Error::file(path, e))?;
            }
        }
        let json = serde_json::to_string_pretty(self).expect("scorer serializes");
        std::fs::write(path, json).map_err(|e| Error::file(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::file(path, e))
    }
}

/// Fits the linear scorer to `(features, quality)` pairs by ridge regression
/// (λ = 1e−6 on the weights, bias unregularized) via the 6×6 normal
/// equations. Requires at least 6 examples; `tau` seeds the stored threshold.
pub fn fit_scorer(seed_set: &[(QualityFeatures, f64)], tau: f64) -> Result<LinearScorer> {
    const DIM: usize = 6; // five features plus bias
    const LAMBDA: f64 = 1e-6;
    if seed_set.len() < DIM {
        return Err(Error::InvalidParameter(format!(
            "scorer fit needs at least {DIM} examples, got {}",
            seed_set.len()
        )));
    }

    // Normal equations A β = b with A = XᵀX + λ diag(1,...,1,0).
    let mut a = [[0.0f64; DIM]; DIM];
    let mut b = [0.0f64; DIM];
    for (features, target) in seed_set {
        let mut row = [0.0; DIM];
        row[..5].copy_from_slice(&features.as_array());
        row[5] = 1.0;
        for i in 0..DIM {
            for j in 0..DIM {
                a[i][j] += row[i] * row[j];
            }
            b[i] += row[i] * target;
        }
    }
    for (i, row) in a.iter_mut().enumerate().take(5) {
        row[i] += LAMBDA;
    }

    let beta = solve_linear(a, b)?;
    Ok(LinearScorer {
        weights: beta[..5].to_vec(),
        bias: beta[5],
        tau,
    })
}

/// Gaussian elimination with partial pivoting for the small normal system.
fn solve_linear<const N: usize>(mut a: [[f64; N]; N], mut b: [f64; N]) -> Result<[f64; N]> {
    for col in 0..N {
        let pivot = (col..N)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty range");
        if a[pivot][col].abs() < 1e-12 {
            return Err(Error::InvalidParameter(
                "scorer fit produced a singular system; supply more varied examples".into(),
            ));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..N {
            let factor = a[row][col] / a[col][col];
            for k in col..N {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = [0.0; N];
    for col in (0..N).rev() {
        let mut acc = b[col];
        for k in col + 1..N {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    Ok(x)
}

/// A candidate mask with its score and acceptance flag.
#[derive(Debug, Clone)]
pub struct ScoredMask {
    pub id: String,
    pub mask: BinaryMask,
    pub features: QualityFeatures,
    pub score: f64,
}

/// Splits candidates into `(accepted, rejected)` by `score >= tau`, keeping
/// input order. Intended for `tau` in `[0, 1]`; out-of-range thresholds
/// simply accept nothing or everything.
pub fn filter_masks(candidates: Vec<ScoredMask>, tau: f64) -> (Vec<ScoredMask>, Vec<ScoredMask>) {
    candidates.into_iter().partition(|c| c.score >= tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn rect_mask(w: u32, h: u32, left: u32, top: u32, right: u32, bottom: u32) -> BinaryMask {
        let mut mask = BinaryMask::new(w, h).unwrap();
        for y in top..=bottom {
            for x in left..=right {
                mask.set(x, y, true);
            }
        }
        mask
    }

    #[test]
    fn component_count_diagonal_is_connected() {
        let mut mask = BinaryMask::new(4, 4).unwrap();
        mask.set(0, 0, true);
        mask.set(1, 1, true); // diagonal touch: one component under 8-conn
        mask.set(3, 3, true); // separate
        assert_eq!(component_count(&mask), 2);
        assert_eq!(component_count(&BinaryMask::new(4, 4).unwrap()), 0);
    }

    #[test]
    fn features_of_a_solid_rect() {
        let mask = rect_mask(20, 20, 5, 5, 14, 14);
        let consensus = SaliencyMap::from_mask(&mask);
        let f = mask_features(&mask, &consensus).unwrap();
        assert!((f.fill_ratio - 100.0 / 400.0).abs() < 1e-12);
        assert_eq!(f.component_count, 1.0);
        assert_eq!(f.solidity, 1.0);
        // 10x10 rect: perimeter ring has 36 pixels.
        assert!((f.compactness - 36.0 * 36.0 / 100.0).abs() < 1e-12);
        // Consensus equals the mask, so the BCE sits at the clip floor.
        assert!(f.bce_vs_consensus < 1e-6);
    }

    #[test]
    fn empty_mask_features_are_defined() {
        let mask = BinaryMask::new(8, 8).unwrap();
        let consensus = SaliencyMap::from_mask(&mask);
        let f = mask_features(&mask, &consensus).unwrap();
        assert_eq!(f.fill_ratio, 0.0);
        assert_eq!(f.component_count, 0.0);
        assert_eq!(f.solidity, 0.0);
        assert_eq!(f.compactness, 0.0);
    }

    #[test]
    fn corruption_moves_features_away_from_consensus() {
        let clean = rect_mask(32, 32, 4, 4, 27, 27);
        let consensus = SaliencyMap::from_mask(&clean);
        let clean_f = mask_features(&clean, &consensus).unwrap();

        let mut corrupt = clean.clone();
        for (x, y) in [(10u32, 10u32), (15, 12), (20, 20), (11, 21)] {
            corrupt.set(x, y, false);
        }
        let corrupt_f = mask_features(&corrupt, &consensus).unwrap();
        assert!(corrupt_f.bce_vs_consensus > clean_f.bce_vs_consensus);
        assert!(corrupt_f.solidity < clean_f.solidity);
        assert!(corrupt_f.compactness > clean_f.compactness);
    }

    #[test]
    fn scorer_fit_recovers_linear_targets() {
        // Targets generated by a known linear rule must be recovered.
        let mut rng = SplitMix64::new(9);
        let true_w = [0.3, -0.05, 0.4, -0.01, -0.2];
        let true_b = 0.35;
        let mut seed = Vec::new();
        for _ in 0..60 {
            let f = QualityFeatures {
                fill_ratio: rng.next_f64(),
                component_count: (rng.next_below(4) + 1) as f64,
                solidity: rng.next_f64(),
                compactness: rng.uniform(5.0, 40.0),
                bce_vs_consensus: rng.next_f64(),
            };
            let x = f.as_array();
            let y: f64 = x.iter().zip(&true_w).map(|(v, w)| v * w).sum::<f64>() + true_b;
            seed.push((f, y));
        }
        let scorer = fit_scorer(&seed, 0.7).unwrap();
        for (w, tw) in scorer.weights.iter().zip(&true_w) {
            assert!((w - tw).abs() < 1e-4, "weight {w} vs {tw}");
        }
        assert!((scorer.bias - true_b).abs() < 1e-3);
        assert_eq!(scorer.tau, 0.7);
    }

    #[test]
    fn scorer_fit_needs_enough_examples() {
        let f = QualityFeatures {
            fill_ratio: 0.5,
            component_count: 1.0,
            solidity: 1.0,
            compactness: 16.0,
            bce_vs_consensus: 0.1,
        };
        assert!(fit_scorer(&vec![(f, 0.5); 5], 0.7).is_err());
    }

    #[test]
    fn constant_features_fit_to_the_mean_target() {
        // Identical rows carry no signal; the ridge keeps the system
        // solvable and pushes all weight into the bias.
        let f = QualityFeatures {
            fill_ratio: 0.0,
            component_count: 0.0,
            solidity: 0.0,
            compactness: 0.0,
            bce_vs_consensus: 0.0,
        };
        let scorer = fit_scorer(&vec![(f, 0.5); 10], 0.7).unwrap();
        assert!((scorer.bias - 0.5).abs() < 1e-9, "bias {}", scorer.bias);
        assert!(scorer.weights.iter().all(|w| w.abs() < 1e-9));
        assert!((scorer.score(&f) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn singular_systems_are_reported() {
        let a = [[1.0, 2.0], [2.0, 4.0]];
        assert!(solve_linear(a, [1.0, 2.0]).is_err());

        let ok = solve_linear([[2.0, 0.0], [0.0, 4.0]], [2.0, 8.0]).unwrap();
        assert_eq!(ok, [1.0, 2.0]);
    }

    #[test]
    fn scores_are_clamped() {
        let scorer = LinearScorer {
            weights: vec![10.0, 0.0, 0.0, 0.0, 0.0],
            bias: 0.0,
            tau: 0.7,
        };
        let mut f = QualityFeatures {
            fill_ratio: 1.0,
            component_count: 1.0,
            solidity: 1.0,
            compactness: 1.0,
            bce_vs_consensus: 0.0,
        };
        assert_eq!(scorer.score(&f), 1.0);
        f.fill_ratio = -1.0;
        assert_eq!(scorer.score(&f), 0.0);
    }

    #[test]
    fn filter_partitions_by_tau() {
        let mask = BinaryMask::new(2, 2).unwrap();
        let f = QualityFeatures {
            fill_ratio: 0.0,
            component_count: 0.0,
            solidity: 0.0,
            compactness: 0.0,
            bce_vs_consensus: 0.0,
        };
        let make = |id: &str, score: f64| ScoredMask {
            id: id.into(),
            mask: mask.clone(),
            features: f,
            score,
        };
        let candidates = vec![make("a", 0.9), make("b", 0.7), make("c", 0.3)];
        let (accepted, rejected) = filter_masks(candidates, 0.7);
        assert_eq!(accepted.len(), 2); // threshold is inclusive
        assert_eq!(rejected.len(), 1);
        assert_eq!(accepted[0].id, "a");
        assert_eq!(rejected[0].id, "c");

        let candidates = vec![make("a", 1.0)];
        let (accepted, rejected) = filter_masks(candidates, 1.0 + 1e-9);
        assert!(accepted.is_empty());
        assert_eq!(rejected.len(), 1);
    }

    #[test]
    fn scorer_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scorer.json");
        let scorer = LinearScorer {
            weights: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            bias: -0.05,
            tau: 0.7,
        };
        scorer.save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"weights\""));
        assert!(text.contains("\"bias\""));
        assert!(text.contains("\"tau\""));
        let back = LinearScorer::load(&path).unwrap();
        assert_eq!(scorer, back);
    }
}
