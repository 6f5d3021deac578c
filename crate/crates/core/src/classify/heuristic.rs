//! Rule-based level-state classifier.
//!
//! A transparent baseline over the same statistics the learned classifier
//! consumes. Rules, in order:
//!
//! 1. change concentrated at the container boundary (> 50%) spanning most of
//!    its height (> 60%) — the container itself moved;
//! 2. change at or below the noise floor — static, split by the previous fill
//!    estimate;
//! 3. otherwise the signed balance decides: darkening (liquid replacing air)
//!    means rising, brightening means falling.

use crate::classify::features::band_stats;
use crate::classify::LevelState;
use crate::diff::{DiffParams, DiffResult};
use crate::error::Result;
use crate::mask::BinaryMask;

/// Classifies one frame-pair diff with fixed rules.
///
/// `noise_floor` is the white-pixel count at or below which the pair counts
/// as static; `prev_fill` is the caller's fill estimate before the pair.
pub fn heuristic_classify(
    diff: &DiffResult,
    container: &BinaryMask,
    prev_fill: f64,
    noise_floor: usize,
    params: &DiffParams,
) -> Result<LevelState> {
    let stats = band_stats(diff, container, params)?;

    if stats.boundary_overlap_fraction > 0.5 && stats.band_height_fraction > 0.6 {
        return Ok(LevelState::ContainerMoved);
    }
    if stats.white_count <= noise_floor {
        return Ok(if prev_fill < 0.5 {
            LevelState::LowStatic
        } else {
            LevelState::HighStatic
        });
    }
    Ok(if stats.sign_balance < 0.0 {
        LevelState::Rising
    } else {
        LevelState::Falling
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::frame_diff;
    use crate::image::{ColorMode, RasterImage};

    fn gray(w: u32, h: u32, value: u8) -> RasterImage {
        RasterImage::from_data(w, h, ColorMode::Gray, vec![value; (w * h) as usize]).unwrap()
    }

    fn rect_mask(w: u32, h: u32, left: u32, top: u32, right: u32, bottom: u32) -> BinaryMask {
        let mut mask = BinaryMask::new(w, h).unwrap();
        for y in top..=bottom {
            for x in left..=right {
                mask.set(x, y, true);
            }
        }
        mask
    }

    fn classify(prev: &RasterImage, curr: &RasterImage, mask: &BinaryMask, fill: f64) -> LevelState {
        let params = DiffParams::default();
        let d = frame_diff(prev, curr, &params).unwrap();
        heuristic_classify(&d, mask, fill, 64, &params).unwrap()
    }

    #[test]
    fn quiet_pair_splits_on_fill() {
        let a = gray(64, 64, 90);
        let mask = rect_mask(64, 64, 8, 8, 55, 55);
        assert_eq!(classify(&a, &a, &mask, 0.2), LevelState::LowStatic);
        assert_eq!(classify(&a, &a, &mask, 0.8), LevelState::HighStatic);
        assert_eq!(classify(&a, &a, &mask, 0.5), LevelState::HighStatic);
    }

    #[test]
    fn darkening_band_is_rising() {
        let prev = gray(64, 64, 150);
        let mut curr = prev.clone();
        // A band in the container middle darkens: liquid replaced air.
        for y in 30..36u32 {
            for x in 12..=51 {
                curr.set_gray(x, y, 40);
            }
        }
        let mask = rect_mask(64, 64, 8, 8, 55, 55);
        assert_eq!(classify(&prev, &curr, &mask, 0.3), LevelState::Rising);
    }

    #[test]
    fn brightening_band_is_falling() {
        let mut prev = gray(64, 64, 150);
        let curr = prev.clone();
        for y in 30..36u32 {
            for x in 12..=51 {
                prev.set_gray(x, y, 40);
            }
        }
        let mask = rect_mask(64, 64, 8, 8, 55, 55);
        assert_eq!(classify(&prev.clone(), &curr, &mask, 0.3), LevelState::Falling);
    }

    #[test]
    fn tall_boundary_change_is_container_motion() {
        let prev = gray(64, 64, 90);
        let mut curr = prev.clone();
        // Vertical strips at both container edges over its full height.
        for y in 8..=55u32 {
            for x in [8u32, 9, 10, 53, 54, 55] {
                curr.set_gray(x, y, 200);
            }
        }
        let mask = rect_mask(64, 64, 8, 8, 55, 55);
        assert_eq!(classify(&prev, &curr, &mask, 0.5), LevelState::ContainerMoved);
    }

    #[test]
    fn noise_floor_is_inclusive() {
        let prev = gray(64, 64, 90);
        let mut curr = prev.clone();
        // Exactly 64 changed pixels scattered in a block-failing pattern
        // still count as static.
        let mut placed = 0;
        'outer: for y in (8..56u32).step_by(4) {
            for x in (8..56u32).step_by(8) {
                curr.set_gray(x, y, 200);
                placed += 1;
                if placed == 64 {
                    break 'outer;
                }
            }
        }
        let mask = rect_mask(64, 64, 8, 8, 55, 55);
        assert_eq!(classify(&prev, &curr, &mask, 0.2), LevelState::LowStatic);
    }
}
