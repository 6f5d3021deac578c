//! Binary morphology for container-mask compensation.
//!
//! Segmentation masks arrive with pinholes and thin boundary breaks. Repair is
//! a closing with an elliptical structuring element followed by hole filling:
//! the closing seals boundary gaps, the flood fill recovers interior regions
//! that remain enclosed. Both primitive operations treat everything outside
//! the raster as background.

use crate::error::{Error, Result};
use crate::image::RasterImage;
use crate::mask::BinaryMask;

/// Neighborhood shape for dilation and erosion, stored as `(dx, dy)` offsets
/// relative to the anchor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuringElement {
    offsets: Vec<(i32, i32)>,
}

impl StructuringElement {
    /// Builds an element from explicit offsets. The set must be non-empty,
    /// contain the anchor `(0, 0)`, and stay within ±15 in each axis.
    pub fn from_offsets(offsets: Vec<(i32, i32)>) -> Result<Self> {
        if offsets.is_empty() {
            return Err(Error::Empty {
                what: "structuring element offset set",
            });
        }
        if !offsets.contains(&(0, 0)) {
            return Err(Error::InvalidParameter(
                "structuring element must contain its anchor (0, 0)".into(),
            ));
        }
        if offsets
            .iter()
            .any(|&(dx, dy)| dx.abs() > 15 || dy.abs() > 15)
        {
            return Err(Error::InvalidParameter(
                "structuring element offsets must stay within ±15".into(),
            ));
        }
        Ok(StructuringElement { offsets })
    }

    /// Elliptical (here: circular) element of odd size in `3..=31`, matching
    /// the row-span convention of mainstream vision libraries: for radius
    /// `r = size / 2`, row `dy` spans `dx ∈ [-round(√(r²−dy²)), +round(√(r²−dy²))]`.
    ///
    /// Size 3 is the 5-offset plus shape; size 5 has full-width rows at
    /// `dy ∈ {-1, 0, 1}` and single pixels at `dy = ±2`, 17 offsets total.
    pub fn ellipse(size: u32) -> Result<Self> {
        if size < 3 || size > 31 || size % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "structuring element size must be odd and in 3..=31, got {size}"
            )));
        }
        let r = (size / 2) as i32;
        let mut offsets = Vec::new();
        for dy in -r..=r {
            let span = ((r * r - dy * dy) as f64).sqrt().round() as i32;
            for dx in -span..=span {
                offsets.push((dx, dy));
            }
        }
        Ok(StructuringElement { offsets })
    }

    /// Full square element of odd size in `3..=31`.
    pub fn square(size: u32) -> Result<Self> {
        if size < 3 || size > 31 || size % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "structuring element size must be odd and in 3..=31, got {size}"
            )));
        }
        let r = (size / 2) as i32;
        let mut offsets = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                offsets.push((dx, dy));
            }
        }
        Ok(StructuringElement { offsets })
    }

    pub fn offsets(&self) -> &[(i32, i32)] {
        &self.offsets
    }

    /// The element mirrored through its anchor.
    pub fn reflect(&self) -> StructuringElement {
        StructuringElement {
            offsets: self.offsets.iter().map(|&(dx, dy)| (-dx, -dy)).collect(),
        }
    }
}

/// Dilation: a pixel is foreground iff the reflected element placed on it
/// overlaps any input foreground — equivalently, the union of element stamps
/// over every input foreground pixel.
pub fn dilate(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    let mut out = BinaryMask::new(mask.width(), mask.height()).expect("source mask is valid");
    for (x, y) in mask.iter_foreground() {
        for &(dx, dy) in se.offsets() {
            let tx = x as i64 + dx as i64;
            let ty = y as i64 + dy as i64;
            if tx >= 0 && ty >= 0 && tx < mask.width() as i64 && ty < mask.height() as i64 {
                out.set(tx as u32, ty as u32, true);
            }
        }
    }
    out
}

/// Erosion: a pixel survives iff the element placed on it lies entirely in
/// foreground. Off-raster positions count as background, so foreground
/// touching the border erodes away.
pub fn erode(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    let mut out = BinaryMask::new(mask.width(), mask.height()).expect("source mask is valid");
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            let inside = se
                .offsets()
                .iter()
                .all(|&(dx, dy)| mask.get(x as i64 + dx as i64, y as i64 + dy as i64));
            if inside {
                out.set(x, y, true);
            }
        }
    }
    out
}

/// Closing: dilation followed by erosion with the same element.
pub fn close(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    erode(&dilate(mask, se), se)
}

/// Fills enclosed background regions: background connected to the raster
/// border through 4-neighbor steps stays background, everything else becomes
/// foreground.
pub fn fill_holes(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let mut outside = vec![false; (w as usize) * (h as usize)];
    let mut queue = std::collections::VecDeque::new();

    let seed = |x: u32, y: u32, outside: &mut Vec<bool>, queue: &mut std::collections::VecDeque<(u32, u32)>| {
        let i = (y as usize) * (w as usize) + (x as usize);
        if !mask.get(x as i64, y as i64) && !outside[i] {
            outside[i] = true;
            queue.push_back((x, y));
        }
    };
    for x in 0..w {
        seed(x, 0, &mut outside, &mut queue);
        seed(x, h - 1, &mut outside, &mut queue);
    }
    for y in 0..h {
        seed(0, y, &mut outside, &mut queue);
        seed(w - 1, y, &mut outside, &mut queue);
    }

    while let Some((x, y)) = queue.pop_front() {
        for (nx, ny) in [
            (x.wrapping_sub(1), y),
            (x + 1, y),
            (x, y.wrapping_sub(1)),
            (x, y + 1),
        ] {
            if nx >= w || ny >= h {
                continue;
            }
            let i = (ny as usize) * (w as usize) + (nx as usize);
            if !mask.get(nx as i64, ny as i64) && !outside[i] {
                outside[i] = true;
                queue.push_back((nx, ny));
            }
        }
    }

    let bits = (0..(w as usize) * (h as usize))
        .map(|i| {
            let x = (i % w as usize) as i64;
            let y = (i / w as usize) as i64;
            mask.get(x, y) || !outside[i]
        })
        .collect();
    BinaryMask::from_bits(w, h, bits).expect("geometry preserved")
}

/// Mask compensation: closing to seal boundary breaks, then hole filling to
/// recover the enclosed interior.
pub fn compensate(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    fill_holes(&close(mask, se))
}

/// Foreground pixels with at least one 4-neighbor background pixel (the
/// raster border counts as background).
pub fn boundary(mask: &BinaryMask) -> BinaryMask {
    let mut out = BinaryMask::new(mask.width(), mask.height()).expect("source mask is valid");
    for (x, y) in mask.iter_foreground() {
        let (xi, yi) = (x as i64, y as i64);
        let edge = !mask.get(xi - 1, yi)
            || !mask.get(xi + 1, yi)
            || !mask.get(xi, yi - 1)
            || !mask.get(xi, yi + 1);
        if edge {
            out.set(x, y, true);
        }
    }
    out
}

/// Zeroes every sample outside the mask; image and mask sizes must match.
pub fn apply_mask(image: &RasterImage, mask: &BinaryMask) -> Result<RasterImage> {
    if image.width() != mask.width() || image.height() != mask.height() {
        return Err(Error::dims(
            (image.width(), image.height()),
            (mask.width(), mask.height()),
        ));
    }
    let channels = image.mode().channels();
    let mut out = image.clone();
    for (i, &keep) in mask.bits().iter().enumerate() {
        if !keep {
            let start = i * channels;
            out.data_mut()[start..start + channels].fill(0);
        }
    }
    Ok(out)
}
