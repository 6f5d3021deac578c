//! Adjacent-frame threshold differencing and block-level motion filtering.
//!
//! Two grayscale frames are compared pixel by pixel: samples whose difference
//! exceeds the threshold land in a signed pair of change planes, and a block
//! grid over their union separates coherent motion from isolated flicker.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{ColorMode, RasterImage};
use crate::mask::BinaryMask;

/// Differencing parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffParams {
    /// Gray-level difference that counts as change, strict (`> threshold`).
    pub threshold: u8,
    /// Side length of the square motion-filter blocks.
    pub block_size: u32,
    /// Fraction of a block's pixels that must change before the block counts
    /// as motion, strict.
    pub block_fill_ratio: f64,
}

impl DiffParams {
    pub fn new(threshold: u8, block_size: u32, block_fill_ratio: f64) -> Result<Self> {
        if threshold == 0 || threshold == 255 {
            return Err(Error::InvalidParameter(format!(
                "threshold must lie in 1..=254, got {threshold}"
            )));
        }
        if block_size == 0 {
            return Err(Error::InvalidParameter("block_size must be positive".into()));
        }
        if !(block_fill_ratio > 0.0 && block_fill_ratio <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "block_fill_ratio must lie in (0, 1], got {block_fill_ratio}"
            )));
        }
        Ok(DiffParams {
            threshold,
            block_size,
            block_fill_ratio,
        })
    }

    /// Replaces the threshold, keeping the block parameters.
    pub fn with_threshold(self, threshold: u8) -> Result<Self> {
        Self::new(threshold, self.block_size, self.block_fill_ratio)
    }
}

impl Default for DiffParams {
    fn default() -> Self {
        DiffParams {
            threshold: 50,
            block_size: 8,
            block_fill_ratio: 0.1,
        }
    }
}

/// Output of [`frame_diff`]: signed change planes, their union, and the
/// block-level motion map.
#[derive(Debug, Clone)]
pub struct DiffResult {
    /// Pixels where the current frame is brighter than the previous one.
    pub pos_plane: BinaryMask,
    /// Pixels where the current frame is darker than the previous one.
    pub neg_plane: BinaryMask,
    /// Union of the signed planes.
    pub abs_plane: BinaryMask,
    /// One entry per block: true where the block passed the fill-ratio test.
    pub block_map: BinaryMask,
    /// Foreground count of `abs_plane`.
    pub white_count: usize,
}

/// Row span and pixel statistics of the changed region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSummary {
    /// Topmost white pixel row inside a motion block, if any.
    pub top_row: Option<u32>,
    /// Bottom-most white pixel row inside a motion block, if any.
    pub bottom_row: Option<u32>,
    /// Mean row of all white pixels, if any.
    pub centroid_row: Option<f64>,
    /// `(pos − neg) / (pos + neg)` over white counts; 0 when both are empty.
    pub sign_balance: f64,
}

/// Differences two grayscale frames of identical size.
pub fn frame_diff(prev: &RasterImage, curr: &RasterImage, params: &DiffParams) -> Result<DiffResult> {
    for img in [prev, curr] {
        if img.mode() != ColorMode::Gray {
            return Err(Error::ChannelMismatch {
                expected: 1,
                got: img.mode().channels() as u8,
            });
        }
    }
    if !prev.same_size(curr) {
        return Err(Error::dims(
            (prev.width(), prev.height()),
            (curr.width(), curr.height()),
        ));
    }

    let (w, h) = (prev.width(), prev.height());
    let t = params.threshold as i32;
    let mut pos = Vec::with_capacity(prev.pixel_count());
    let mut neg = Vec::with_capacity(prev.pixel_count());
    for (&p, &c) in prev.data().iter().zip(curr.data()) {
        let d = c as i32 - p as i32;
        pos.push(d > t);
        neg.push(-d > t);
    }
    let pos_plane = BinaryMask::from_bits(w, h, pos)?;
    let neg_plane = BinaryMask::from_bits(w, h, neg)?;
    let abs_plane = pos_plane.union(&neg_plane)?;
    let white_count = abs_plane.count_foreground();
    let block_map = classify_blocks(&abs_plane, params);
    Ok(DiffResult {
        pos_plane,
        neg_plane,
        abs_plane,
        block_map,
        white_count,
    })
}

/// Applies the block fill-ratio test to a change plane. The returned mask has
/// one pixel per block (`ceil(w / block)` × `ceil(h / block)`); edge blocks
/// are truncated to the raster and judged against their true pixel count.
pub fn classify_blocks(plane: &BinaryMask, params: &DiffParams) -> BinaryMask {
    let b = params.block_size;
    let blocks_w = plane.width().div_ceil(b);
    let blocks_h = plane.height().div_ceil(b);
    let mut map = BinaryMask::new(blocks_w, blocks_h).expect("plane dimensions are positive");
    for by in 0..blocks_h {
        for bx in 0..blocks_w {
            let x0 = bx * b;
            let y0 = by * b;
            let x1 = (x0 + b).min(plane.width());
            let y1 = (y0 + b).min(plane.height());
            let mut white = 0usize;
            for y in y0..y1 {
                for x in x0..x1 {
                    if plane.get(x as i64, y as i64) {
                        white += 1;
                    }
                }
            }
            let total = ((x1 - x0) * (y1 - y0)) as f64;
            if white as f64 > params.block_fill_ratio * total {
                map.set(bx, by, true);
            }
        }
    }
    map
}

/// Summarizes the changed region of a diff: the row span of white pixels that
/// fall inside motion blocks, the centroid row of all white pixels, and the
/// signed-plane balance.
pub fn change_band(diff: &DiffResult, params: &DiffParams) -> BandSummary {
    let b = params.block_size as i64;
    let mut top: Option<u32> = None;
    let mut bottom: Option<u32> = None;
    let mut row_sum = 0f64;
    let mut white = 0usize;

    for (x, y) in diff.abs_plane.iter_foreground() {
        row_sum += y as f64;
        white += 1;
        let in_motion_block = diff.block_map.get(x as i64 / b, y as i64 / b);
        if in_motion_block {
            top = Some(top.map_or(y, |t| t.min(y)));
            bottom = Some(bottom.map_or(y, |t| t.max(y)));
        }
    }

    let pos = diff.pos_plane.count_foreground();
    let neg = diff.neg_plane.count_foreground();
    let sign_balance = if pos + neg == 0 {
        0.0
    } else {
        (pos as f64 - neg as f64) / (pos + neg) as f64
    };

    BandSummary {
        top_row: top,
        bottom_row: bottom,
        centroid_row: if white > 0 {
            Some(row_sum / white as f64)
        } else {
            None
        },
        sign_balance,
    }
}
