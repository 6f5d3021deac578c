//! Feature extraction: a frame-pair diff reduced to a fixed-length vector.
//!
//! Layout: a 16×16 density grid over the container bounding box for the
//! positive plane (256 values), the same for the negative plane (256), then
//! six global statistics. Grid densities are translation-covariant because
//! the grid follows the container's bounding box, not the raster.

use crate::diff::{change_band, DiffParams, DiffResult};
use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::morphology::{boundary, dilate, StructuringElement};

/// Grid resolution per axis and per plane.
pub const GRID: usize = 16;
/// Number of trailing global features.
pub const GLOBAL_FEATURES: usize = 6;
/// Total feature vector length: two grids plus the global block.
pub const FEATURE_LEN: usize = 2 * GRID * GRID + GLOBAL_FEATURES;

/// Fixed-length feature vector for one frame pair.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    /// Wraps a raw vector; the length must be [`FEATURE_LEN`].
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() != FEATURE_LEN {
            return Err(Error::FeatureLength {
                expected: FEATURE_LEN,
                got: values.len(),
            });
        }
        Ok(FeatureVector { values })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Fraction of container pixels that changed, capped at 1.
    pub fn white_count_rate(&self) -> f64 {
        self.values[2 * GRID * GRID]
    }

    /// Signed balance of the change planes in `[-1, 1]`.
    pub fn sign_balance(&self) -> f64 {
        self.values[2 * GRID * GRID + 1]
    }

    /// Band top as a fraction of container height; 1 when no band.
    pub fn band_top_fraction(&self) -> f64 {
        self.values[2 * GRID * GRID + 2]
    }

    /// Band row span as a fraction of container height; 0 when no band.
    pub fn band_height_fraction(&self) -> f64 {
        self.values[2 * GRID * GRID + 3]
    }

    /// Fraction of changed pixels within 2 px of the container boundary.
    pub fn boundary_overlap_fraction(&self) -> f64 {
        self.values[2 * GRID * GRID + 4]
    }

    /// Estimated fill fraction before the pair, threaded in by the caller.
    pub fn prev_fill_fraction(&self) -> f64 {
        self.values[2 * GRID * GRID + 5]
    }
}

/// Mid-level statistics shared by feature extraction and the rule-based
/// classifier.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BandStats {
    pub white_count: usize,
    pub white_count_rate: f64,
    pub sign_balance: f64,
    pub band_top_fraction: f64,
    pub band_height_fraction: f64,
    pub boundary_overlap_fraction: f64,
}

pub(crate) fn band_stats(
    diff: &DiffResult,
    container: &BinaryMask,
    params: &DiffParams,
) -> Result<BandStats> {
    if !diff.abs_plane.same_size(container) {
        return Err(Error::dims(
            (container.width(), container.height()),
            (diff.abs_plane.width(), diff.abs_plane.height()),
        ));
    }
    let (_, top, _, bottom) = container.bounding_box().ok_or(Error::Empty {
        what: "container mask",
    })?;
    let box_h = (bottom - top + 1) as f64;

    let area = container.count_foreground();
    let white = diff.white_count;
    let white_count_rate = (white as f64 / area as f64).min(1.0);

    let band = change_band(diff, params);
    let (band_top_fraction, band_height_fraction) = match (band.top_row, band.bottom_row) {
        (Some(t), Some(b)) => {
            let rel_top = (t as f64 - top as f64).max(0.0) / box_h;
            let span = (b - t + 1) as f64 / box_h;
            (rel_top.min(1.0), span.min(1.0))
        }
        _ => (1.0, 0.0),
    };

    // Within 2 px of the boundary: the boundary ring dilated by a 5x5 square
    // covers exactly the Chebyshev-2 neighborhood.
    let boundary_overlap_fraction = if white == 0 {
        0.0
    } else {
        let ring = boundary(container);
        let near = dilate(&ring, &StructuringElement::square(5).expect("size 5 is valid"));
        let mut overlap = 0usize;
        for (x, y) in diff.abs_plane.iter_foreground() {
            if near.get(x as i64, y as i64) {
                overlap += 1;
            }
        }
        overlap as f64 / white as f64
    };

    Ok(BandStats {
        white_count: white,
        white_count_rate,
        sign_balance: band.sign_balance,
        band_top_fraction,
        band_height_fraction,
        boundary_overlap_fraction,
    })
}

/// Builds the feature vector for one frame-pair diff.
///
/// `container` is the pair's container mask (already compensated);
/// `prev_fill` is the caller's estimate of the fill fraction before the pair
/// and is clamped to `[0, 1]`.
pub fn extract_features(
    diff: &DiffResult,
    container: &BinaryMask,
    prev_fill: f64,
    params: &DiffParams,
) -> Result<FeatureVector> {
    let stats = band_stats(diff, container, params)?;
    let (left, top, right, bottom) = container
        .bounding_box()
        .expect("band_stats verified the mask is non-empty");
    let box_w = (right - left + 1) as u64;
    let box_h = (bottom - top + 1) as u64;

    let mut values = vec![0.0; FEATURE_LEN];
    let mut cell_pixels = [0u32; GRID * GRID];
    // Count pixels per cell once; cells can differ in size when the box is
    // not a multiple of the grid.
    for y in top..=bottom {
        let gy = ((y - top) as u64 * GRID as u64 / box_h) as usize;
        for x in left..=right {
            let gx = ((x - left) as u64 * GRID as u64 / box_w) as usize;
            cell_pixels[gy * GRID + gx] += 1;
        }
    }

    for (plane_index, plane) in [&diff.pos_plane, &diff.neg_plane].into_iter().enumerate() {
        let base = plane_index * GRID * GRID;
        for (x, y) in plane.iter_foreground() {
            if x < left || x > right || y < top || y > bottom {
                continue;
            }
            let gx = ((x - left) as u64 * GRID as u64 / box_w) as usize;
            let gy = ((y - top) as u64 * GRID as u64 / box_h) as usize;
            values[base + gy * GRID + gx] += 1.0;
        }
        for cell in 0..GRID * GRID {
            if cell_pixels[cell] > 0 {
                values[base + cell] /= cell_pixels[cell] as f64;
            }
        }
    }

    let g = 2 * GRID * GRID;
    values[g] = stats.white_count_rate;
    values[g + 1] = stats.sign_balance;
    values[g + 2] = stats.band_top_fraction;
    values[g + 3] = stats.band_height_fraction;
    values[g + 4] = stats.boundary_overlap_fraction;
    values[g + 5] = prev_fill.clamp(0.0, 1.0);

    FeatureVector::from_values(values)
}
