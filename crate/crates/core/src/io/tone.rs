//! Tone mapping for human-viewable previews of linear intensity data.

use crate::error::{Error, Result};

/// Display gamma applied after normalization.
pub const DISPLAY_GAMMA: f64 = 2.2;

/// Fraction of samples allowed to clip at the top of the range.
const CLIP_QUANTILE: f64 = 0.999;

/// The normalization ceiling: the 99.9th percentile of the values, so a
/// few hot pixels cannot crush the rest of the image to black.
pub fn clip_level(values: impl Iterator<Item = f64>) -> Result<f64> {
    let mut sorted: Vec<f64> = values.collect();
    if sorted.is_empty() {
        return Err(Error::invalid("cannot tone map an empty image"));
    }
    if !sorted.iter().all(|v| v.is_finite() && *v >= 0.0) {
        return Err(Error::invalid("tone mapping expects finite non-negative values"));
    }
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let idx = ((sorted.len() - 1) as f64 * CLIP_QUANTILE).round() as usize;
    Ok(sorted[idx])
}

fn encode(value: f64, ceiling: f64) -> u8 {
    if ceiling <= 0.0 {
        return 0;
    }
    let v = (value / ceiling).clamp(0.0, 1.0).powf(1.0 / DISPLAY_GAMMA);
    (v * 255.0).round() as u8
}

/// Tone maps one linear grayscale image to 8 bits.
pub fn tone_map(values: &[f64]) -> Result<Vec<u8>> {
    let ceiling = clip_level(values.iter().copied())?;
    Ok(values.iter().map(|&v| encode(v, ceiling)).collect())
}

/// Tone maps linear RGB pixels with one shared ceiling across channels,
/// preserving color ratios.
pub fn tone_map_rgb(pixels: &[[f64; 3]]) -> Result<Vec<[u8; 3]>> {
    let ceiling = clip_level(pixels.iter().flat_map(|px| px.iter().copied()))?;
    Ok(pixels
        .iter()
        .map(|px| [encode(px[0], ceiling), encode(px[1], ceiling), encode(px[2], ceiling)])
        .collect())
}
