//! Seeded augmentation: additive Gaussian noise and mixup blending.

use crate::engine::SaliencyMap;
use crate::error::{Error, Result};
use crate::image::{quantize_intensity, RasterImage};
use crate::rng::SplitMix64;

/// Adds Gaussian noise with standard deviation `sigma` to every sample,
/// clamping and rounding back to 8 bits. `sigma = 0` returns the input
/// unchanged; the draw order is the sample order, so results are fully
/// determined by the seed.
pub fn augment_noise(image: &RasterImage, sigma: f64, seed: u64) -> Result<RasterImage> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "noise sigma must be finite and non-negative, got {sigma}"
        )));
    }
    let mut out = image.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let mut rng = SplitMix64::new(seed);
    for sample in out.data_mut() {
        let noisy = *sample as f64 + sigma * rng.next_gaussian();
        *sample = quantize_intensity(noisy);
    }
    Ok(out)
}

/// Mixup: blends two image/saliency pairs with weight `lambda` on the first.
/// Image samples are rounded back to 8 bits; saliency values stay
/// real-valued. `lambda` must lie in `[0, 1]` and the pairs must agree in
/// size.
pub fn augment_mixup(
    a: (&RasterImage, &SaliencyMap),
    b: (&RasterImage, &SaliencyMap),
    lambda: f64,
) -> Result<(RasterImage, SaliencyMap)> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParameter(format!(
            "mixup lambda must lie in [0, 1], got {lambda}"
        )));
    }
    let (img_a, map_a) = a;
    let (img_b, map_b) = b;
    if !img_a.same_size(img_b) || img_a.mode() != img_b.mode() {
        return Err(Error::dims(
            (img_a.width(), img_a.height()),
            (img_b.width(), img_b.height()),
        ));
    }
    if !map_a.same_size(map_b)
        || map_a.width() != img_a.width()
        || map_a.height() != img_a.height()
    {
        return Err(Error::dims(
            (img_a.width(), img_a.height()),
            (map_a.width(), map_a.height()),
        ));
    }

    let mut image = img_a.clone();
    for (out, &vb) in image.data_mut().iter_mut().zip(img_b.data()) {
        let blended = lambda * (*out as f64) + (1.0 - lambda) * (vb as f64);
        *out = quantize_intensity(blended);
    }
    let probs = map_a
        .probs()
        .iter()
        .zip(map_b.probs())
        .map(|(&pa, &pb)| lambda * pa + (1.0 - lambda) * pb)
        .collect();
    let map = SaliencyMap::from_probs(map_a.width(), map_a.height(), probs)?;
    Ok((image, map))
}
