//! Measured laser amplitude profiles.
//!
//! A profile is a little-endian f32 raw file, row-major over the
//! hologram grid, holding relative source amplitude per pixel. Loading
//! rejects non-positive or non-finite samples and rescales to unit
//! mean, so the global scales keep the sole responsibility for overall
//! brightness.

use super::read_f32_raw;
use crate::error::{Error, Result};
use std::path::Path;

/// Loads and mean-normalizes a laser amplitude profile for a
/// `width` x `height` hologram.
pub fn load_laser_profile(path: &Path, width: usize, height: usize) -> Result<Vec<f64>> {
    let n = width * height;
    if n == 0 {
        return Err(Error::invalid("laser profile dimensions must be nonzero"));
    }
    let len = std::fs::metadata(path)?.len();
    if len != (n * 4) as u64 {
        return Err(Error::mismatch(format!(
            "laser profile holds {} bytes but {}x{} needs {}",
            len,
            width,
            height,
            n * 4
        )));
    }
    let mut values = read_f32_raw(path, n)?;
    if !values.iter().all(|&v| v.is_finite() && v > 0.0) {
        return Err(Error::invalid(
            "laser profile samples must be positive and finite",
        ));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    for v in values.iter_mut() {
        *v /= mean;
    }
    Ok(values)
}
