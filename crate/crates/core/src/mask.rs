//! Binary masks: foreground/background rasters used for container
//! segmentation, difference planes, and block maps.

use crate::error::{Error, Result};
use crate::image::{ColorMode, RasterImage};

/// Dense binary raster. Out-of-bounds reads are background, which fixes the
/// border convention for every morphological operation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    /// All-background mask; dimensions must be positive.
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "mask dimensions must be positive, got {width}x{height}"
            )));
        }
        Ok(BinaryMask {
            width,
            height,
            bits: vec![false; (width as usize) * (height as usize)],
        })
    }

    /// All-foreground mask.
    pub fn filled(width: u32, height: u32) -> Result<Self> {
        let mut mask = Self::new(width, height)?;
        mask.bits.fill(true);
        Ok(mask)
    }

    /// Wraps an existing bit buffer; its length must match the geometry.
    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        let mut mask = Self::new(width, height)?;
        if bits.len() != mask.bits.len() {
            return Err(Error::InvalidParameter(format!(
                "bit buffer has {} entries, geometry needs {}",
                bits.len(),
                mask.bits.len()
            )));
        }
        mask.bits = bits;
        Ok(mask)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn same_size(&self, other: &BinaryMask) -> bool {
        self.width == other.width && self.height == other.height
    }

    fn index(&self, x: u32, y: u32) -> usize {
        (y as usize) * (self.width as usize) + (x as usize)
    }

    /// Foreground test with the background border convention: any coordinate
    /// outside the raster reads as background.
    pub fn get(&self, x: i64, y: i64) -> bool {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return false;
        }
        self.bits[(y as usize) * (self.width as usize) + (x as usize)]
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let i = self.index(x, y);
        self.bits[i] = value;
    }

    pub fn count_foreground(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Iterates foreground coordinates in row-major order.
    pub fn iter_foreground(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| ((i as u32) % w, (i as u32) / w))
    }

    /// Inclusive bounding box `(left, top, right, bottom)` of the foreground,
    /// or None when the mask has no foreground.
    pub fn bounding_box(&self) -> Option<(u32, u32, u32, u32)> {
        let mut bounds: Option<(u32, u32, u32, u32)> = None;
        for (x, y) in self.iter_foreground() {
            bounds = Some(match bounds {
                None => (x, y, x, y),
                Some((l, t, r, b)) => (l.min(x), t.min(y), r.max(x), b.max(y)),
            });
        }
        bounds
    }

    /// Pixelwise union; dimensions must match.
    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a | b)
    }

    /// Pixelwise intersection; dimensions must match.
    pub fn intersection(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a & b)
    }

    fn zip_with(&self, other: &BinaryMask, op: impl Fn(bool, bool) -> bool) -> Result<BinaryMask> {
        if !self.same_size(other) {
            return Err(Error::dims(
                (self.width, self.height),
                (other.width, other.height),
            ));
        }
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(&a, &b)| op(a, b))
            .collect();
        BinaryMask::from_bits(self.width, self.height, bits)
    }

    /// Intersection-over-union. Two empty masks are identical, so IoU is 1.
    pub fn iou(&self, other: &BinaryMask) -> Result<f64> {
        if !self.same_size(other) {
            return Err(Error::dims(
                (self.width, self.height),
                (other.width, other.height),
            ));
        }
        let mut inter = 0usize;
        let mut union = 0usize;
        for (&a, &b) in self.bits.iter().zip(&other.bits) {
            if a & b {
                inter += 1;
            }
            if a | b {
                union += 1;
            }
        }
        if union == 0 {
            Ok(1.0)
        } else {
            Ok(inter as f64 / union as f64)
        }
    }

    /// Renders to a single-channel image with foreground 255, background 0.
    pub fn to_raster(&self) -> RasterImage {
        let data = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        RasterImage::from_data(self.width, self.height, ColorMode::Gray, data)
            .expect("mask geometry is always valid")
    }

    /// Binarizes a single-channel image: samples >= 128 become foreground.
    pub fn from_raster(image: &RasterImage) -> Result<BinaryMask> {
        if image.mode() != ColorMode::Gray {
            return Err(Error::ChannelMismatch {
                expected: 1,
                got: image.mode().channels() as u8,
            });
        }
        let bits = image.data().iter().map(|&v| v >= 128).collect();
        BinaryMask::from_bits(image.width(), image.height(), bits)
    }
}
