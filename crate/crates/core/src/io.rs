//! Image file IO: PNG plus binary PGM/PPM, 8-bit only.
//!
//! The pipeline exchanges frames as RGB images and masks as single-channel
//! images with foreground 255. Sixteen-bit inputs are rejected outright
//! rather than silently truncated.

use std::path::Path;

use image::{DynamicImage, ImageFormat};

use crate::error::{Error, Result};
use crate::image::{ColorMode, RasterImage};
use crate::mask::BinaryMask;

fn format_for(path: &Path) -> Result<ImageFormat> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "png" => Ok(ImageFormat::Png),
        "pgm" | "ppm" | "pnm" => Ok(ImageFormat::Pnm),
        other => Err(Error::UnsupportedImage {
            path: path.to_path_buf(),
            detail: format!("unrecognized extension {other:?}; use png, pgm, or ppm"),
        }),
    }
}

/// Reads an 8-bit image. Alpha channels are dropped; 16-bit and float
/// sample formats are rejected with a descriptive error.
pub fn read_image(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let decoded = image::ImageReader::open(path)
        .map_err(|e| Error::file(path, e))?
        .decode()
        .map_err(|e| Error::file(path, e))?;
    let (width, height) = (decoded.width(), decoded.height());

    let (mode, data) = match decoded {
        DynamicImage::ImageLuma8(buf) => (ColorMode::Gray, buf.into_raw()),
        DynamicImage::ImageLumaA8(buf) => (
            ColorMode::Gray,
            buf.into_raw().chunks_exact(2).map(|px| px[0]).collect(),
        ),
        DynamicImage::ImageRgb8(buf) => (ColorMode::Rgb, buf.into_raw()),
        DynamicImage::ImageRgba8(buf) => (
            ColorMode::Rgb,
            buf.into_raw()
                .chunks_exact(4)
                .flat_map(|px| [px[0], px[1], px[2]])
                .collect(),
        ),
        other => {
            return Err(Error::UnsupportedImage {
                path: path.to_path_buf(),
                detail: format!(
                    "{:?} samples are not supported; re-encode as 8-bit",
                    other.color()
                ),
            })
        }
    };
    RasterImage::from_data(width, height, mode, data)
}

/// Writes an image; the format is chosen from the extension. PGM accepts
/// only single-channel images and PPM only three-channel ones.
pub fn write_image(path: impl AsRef<Path>, image: &RasterImage) -> Result<()> {
    let path = path.as_ref();
    let format = format_for(path)?;
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    if ext == "pgm" && image.mode() != ColorMode::Gray {
        return Err(Error::ChannelMismatch {
            expected: 1,
            got: image.mode().channels() as u8,
        });
    }
    if ext == "ppm" && image.mode() != ColorMode::Rgb {
        return Err(Error::ChannelMismatch {
            expected: 3,
            got: image.mode().channels() as u8,
        });
    }
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::file(path, e))?;
        }
    }
    let color = match image.mode() {
        ColorMode::Gray => image::ExtendedColorType::L8,
        ColorMode::Rgb => image::ExtendedColorType::Rgb8,
    };
    image::save_buffer_with_format(
        path,
        image.data(),
        image.width(),
        image.height(),
        color,
        format,
    )
    .map_err(|e| Error::file(path, e))
}

/// Reads a mask image: must decode to a single channel; samples >= 128 are
/// foreground.
pub fn read_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let path = path.as_ref();
    let img = read_image(path)?;
    if img.mode() != ColorMode::Gray {
        return Err(Error::UnsupportedImage {
            path: path.to_path_buf(),
            detail: "masks must be single-channel".into(),
        });
    }
    BinaryMask::from_raster(&img)
}

/// Writes a mask as an 8-bit image with foreground 255.
pub fn write_mask(path: impl AsRef<Path>, mask: &BinaryMask) -> Result<()> {
    write_image(path, &mask.to_raster())
}
