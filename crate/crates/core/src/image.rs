//! Raster images and the weighted dual grayscale conversion.
//!
//! Grayscale fusion blends two conversions: a YUV-weighted average `I1` that
//! keeps chroma contrast, and a squared-channel normalization `I2` that
//! amplifies bright regions. The fused intensity is `alpha * I1 + beta * I2`
//! with `alpha + beta = 1`, computed in f64 and quantized only when a pixel
//! value is stored.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pixel layout of a [`RasterImage`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColorMode {
    Gray,
    Rgb,
}

impl ColorMode {
    pub fn channels(self) -> usize {
        match self {
            ColorMode::Gray => 1,
            ColorMode::Rgb => 3,
        }
    }
}

/// 8-bit image with interleaved row-major samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    mode: ColorMode,
    data: Vec<u8>,
}

impl RasterImage {
    /// Allocates a black single-channel image.
    pub fn new_gray(width: u32, height: u32) -> Result<Self> {
        Self::from_data(
            width,
            height,
            ColorMode::Gray,
            vec![0; (width as usize) * (height as usize)],
        )
    }

    /// Allocates a black three-channel image.
    pub fn new_rgb(width: u32, height: u32) -> Result<Self> {
        Self::from_data(
            width,
            height,
            ColorMode::Rgb,
            vec![0; (width as usize) * (height as usize) * 3],
        )
    }

    /// Wraps an existing sample buffer; its length must match the geometry.
    pub fn from_data(width: u32, height: u32, mode: ColorMode, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        let expected = (width as usize) * (height as usize) * mode.channels();
        if data.len() != expected {
            return Err(Error::InvalidParameter(format!(
                "sample buffer has {} bytes, geometry needs {expected}",
                data.len()
            )));
        }
        Ok(RasterImage {
            width,
            height,
            mode,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn mode(&self) -> ColorMode {
        self.mode
    }

    pub fn pixel_count(&self) -> usize {
        (self.width as usize) * (self.height as usize)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn same_size(&self, other: &RasterImage) -> bool {
        self.width == other.width && self.height == other.height
    }

    fn index(&self, x: u32, y: u32) -> usize {
        debug_assert!(x < self.width && y < self.height);
        ((y as usize) * (self.width as usize) + (x as usize)) * self.mode.channels()
    }

    /// Sample at `(x, y)`; the image must be single-channel.
    pub fn gray_at(&self, x: u32, y: u32) -> u8 {
        debug_assert_eq!(self.mode, ColorMode::Gray);
        self.data[self.index(x, y)]
    }

    /// Sample triple at `(x, y)`; the image must be three-channel.
    pub fn rgb_at(&self, x: u32, y: u32) -> (u8, u8, u8) {
        debug_assert_eq!(self.mode, ColorMode::Rgb);
        let i = self.index(x, y);
        (self.data[i], self.data[i + 1], self.data[i + 2])
    }

    pub fn set_gray(&mut self, x: u32, y: u32, value: u8) {
        debug_assert_eq!(self.mode, ColorMode::Gray);
        let i = self.index(x, y);
        self.data[i] = value;
    }

    pub fn set_rgb(&mut self, x: u32, y: u32, rgb: (u8, u8, u8)) {
        debug_assert_eq!(self.mode, ColorMode::Rgb);
        let i = self.index(x, y);
        self.data[i] = rgb.0;
        self.data[i + 1] = rgb.1;
        self.data[i + 2] = rgb.2;
    }
}

/// Fusion weights for the dual grayscale conversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrayParams {
    alpha: f64,
    beta: f64,
}

impl GrayParams {
    /// Both weights must lie in `[0, 1]` and sum to 1 within 1e-12.
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&beta) {
            return Err(Error::InvalidParameter(format!(
                "grayscale weights must lie in [0, 1], got alpha={alpha}, beta={beta}"
            )));
        }
        if (alpha + beta - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "grayscale weights must sum to 1, got alpha={alpha}, beta={beta}"
            )));
        }
        Ok(GrayParams { alpha, beta })
    }

    /// Convenience constructor deriving `beta = 1 - alpha`.
    pub fn from_alpha(alpha: f64) -> Result<Self> {
        Self::new(alpha, 1.0 - alpha)
    }

    pub fn alpha(self) -> f64 {
        self.alpha
    }

    pub fn beta(self) -> f64 {
        self.beta
    }
}

impl Default for GrayParams {
    fn default() -> Self {
        GrayParams {
            alpha: 0.5,
            beta: 0.5,
        }
    }
}

/// YUV-weighted conversion: `(R/3 + G/3 + B/3 + U + V) / 4`, clamped to
/// `[0, 255]`, with `U = 0.565 (B − Y)` and `V = 0.713 (R − Y)`.
pub fn intensity_i1(r: u8, g: u8, b: u8) -> f64 {
    let (r, g, b) = (r as f64, g as f64, b as f64);
    let y = 0.299 * r + 0.587 * g + 0.114 * b;
    let u = 0.565 * (b - y);
    let v = 0.713 * (r - y);
    (((r + g + b) / 3.0 + u + v) / 4.0).clamp(0.0, 255.0)
}

/// Squared-channel normalization: `(R² + G² + B²) / (R + G + B)`, 0 for black.
pub fn intensity_i2(r: u8, g: u8, b: u8) -> f64 {
    let (r, g, b) = (r as f64, g as f64, b as f64);
    let sum = r + g + b;
    if sum == 0.0 {
        0.0
    } else {
        (r * r + g * g + b * b) / sum
    }
}

/// Fused intensity `alpha * I1 + beta * I2` before quantization.
pub fn fused_intensity(r: u8, g: u8, b: u8, params: GrayParams) -> f64 {
    params.alpha() * intensity_i1(r, g, b) + params.beta() * intensity_i2(r, g, b)
}

/// Rounds half-up and clamps to the 8-bit range; the only place real-valued
/// intensities become stored samples.
pub fn quantize_intensity(value: f64) -> u8 {
    (value + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Converts a three-channel image to single-channel via the fused intensity.
pub fn to_grayscale(image: &RasterImage, params: GrayParams) -> Result<RasterImage> {
    if image.mode() != ColorMode::Rgb {
        return Err(Error::ChannelMismatch {
            expected: 3,
            got: image.mode().channels() as u8,
        });
    }
    let mut out = Vec::with_capacity(image.pixel_count());
    for chunk in image.data().chunks_exact(3) {
        let value = fused_intensity(chunk[0], chunk[1], chunk[2], params);
        out.push(quantize_intensity(value));
    }
    RasterImage::from_data(image.width(), image.height(), ColorMode::Gray, out)
}
