//! Defocus point-spread functions for incoherent focal-stack rendering.
//!
//! A scene point at depth offset `dz` from a focal plane blurs into the
//! squared magnitude of the coherently defocused impulse response,
//! cropped by a circular cone-of-light mask of radius `|dz| * tan(angle)`
//! and normalized to unit total energy so splatting conserves light.

use crate::error::{Error, Result};
use crate::fft::fft2;
use crate::field::FrequencyGrid;
use crate::propagation::coherent_kernel;

/// Spatial cutoff applied to the defocus PSF.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaskSpec {
    /// Keep the full periodized PSF.
    None,
    /// Crop to the geometric cone of light. `max_angle` is the half-angle
    /// in radians; `None` selects the diffraction limit of the sampling,
    /// `asin(lambda / (2 * pitch))`.
    Circular { max_angle: Option<f64> },
}

impl MaskSpec {
    /// Circular mask at the default diffraction-limited angle.
    pub fn default_circular() -> Self {
        MaskSpec::Circular { max_angle: None }
    }
}

/// Diffraction-limited half-angle of a grid: `asin(lambda / (2 * pitch))`.
pub fn default_max_angle(wavelength: f64, pitch: f64) -> f64 {
    (wavelength / (2.0 * pitch)).clamp(-1.0, 1.0).asin()
}

/// Square sampling grid an incoherent kernel lives on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelGrid {
    pub width: usize,
    pub height: usize,
    pub pitch: f64,
}

/// Rasterizes the cone-of-light disk for a depth offset `delta_depth`:
/// pixels whose center lies within `|delta_depth| * tan(max_angle)` of
/// the grid center `(width/2, height/2)`. Zero offset keeps only the
/// center pixel; a disk larger than the grid keeps everything.
pub fn circular_mask(grid: &KernelGrid, delta_depth: f64, max_angle: f64) -> Vec<bool> {
    let radius_m = delta_depth.abs() * max_angle.tan();
    let radius_px = radius_m / grid.pitch;
    let (cx, cy) = ((grid.width / 2) as f64, (grid.height / 2) as f64);
    let r2 = radius_px * radius_px;
    let mut mask = vec![false; grid.width * grid.height];
    for y in 0..grid.height {
        for x in 0..grid.width {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            mask[y * grid.width + x] = dx * dx + dy * dy <= r2;
        }
    }
    mask
}

/// An intensity point-spread function, centered on its grid and summing
/// to one.
#[derive(Debug, Clone)]
pub struct IncoherentKernel {
    pub width: usize,
    pub height: usize,
    pub pitch: f64,
    pub wavelength: f64,
    /// Depth of the source point minus the focal-plane depth.
    pub delta_depth: f64,
    /// Non-negative weights, row-major, zero outside the mask.
    pub values: Vec<f64>,
    /// Radius in pixels beyond which all values are zero, measured from
    /// the center pixel `(width/2, height/2)`.
    pub support_radius: f64,
}

/// Builds the defocus PSF of a point at `point_depth` observed on the
/// focal plane at `plane_depth`: propagate an impulse coherently over the
/// depth gap, take the squared magnitude, apply `mask`, and normalize.
///
/// Fails when a circular mask does not fit the grid, since the cropped
/// energy would silently change the kernel.
pub fn incoherent_kernel(
    point_depth: f64,
    plane_depth: f64,
    wavelength: f64,
    grid: &KernelGrid,
    mask: &MaskSpec,
) -> Result<IncoherentKernel> {
    if grid.width == 0 || grid.height == 0 {
        return Err(Error::invalid("kernel grid dimensions must be nonzero"));
    }
    if !(grid.pitch.is_finite() && grid.pitch > 0.0) {
        return Err(Error::invalid("kernel grid pitch must be positive"));
    }
    if !(point_depth.is_finite() && plane_depth.is_finite()) {
        return Err(Error::invalid("depths must be finite"));
    }
    let delta = point_depth - plane_depth;
    let (w, h) = (grid.width, grid.height);

    let support_radius = match mask {
        MaskSpec::None => ((w / 2) as f64).hypot((h / 2) as f64),
        MaskSpec::Circular { max_angle } => {
            let angle = max_angle.unwrap_or_else(|| default_max_angle(wavelength, grid.pitch));
            let radius_px = delta.abs() * angle.tan() / grid.pitch;
            let max_fit = ((w / 2).min(h / 2)) as f64;
            if radius_px > max_fit {
                return Err(Error::invalid(format!(
                    "mask radius {radius_px:.1} px exceeds the {w}x{h} kernel grid"
                )));
            }
            radius_px
        }
    };

    // Coherent impulse response over the depth gap, periodized on this
    // grid, with the origin rolled to the center pixel.
    let fgrid = FrequencyGrid::new(w, h, grid.pitch)?;
    let kernel = coherent_kernel(&fgrid, wavelength, delta)?;
    let mut spectrum = kernel.values().to_vec();
    fft2(&mut spectrum, h, w, true);
    let (cx, cy) = (w / 2, h / 2);
    let mut values = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            values[((y + cy) % h) * w + (x + cx) % w] = spectrum[y * w + x].norm_sqr();
        }
    }

    match mask {
        MaskSpec::None => {}
        MaskSpec::Circular { max_angle } => {
            let angle = max_angle.unwrap_or_else(|| default_max_angle(wavelength, grid.pitch));
            let m = circular_mask(grid, delta, angle);
            for (v, keep) in values.iter_mut().zip(m) {
                if !keep {
                    *v = 0.0;
                }
            }
        }
    }

    let total: f64 = values.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::numerical("incoherent kernel has no energy after masking"));
    }
    for v in values.iter_mut() {
        *v /= total;
    }
    Ok(IncoherentKernel {
        width: w,
        height: h,
        pitch: grid.pitch,
        wavelength,
        delta_depth: delta,
        values,
        support_radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const GRID: KernelGrid = KernelGrid { width: 33, height: 33, pitch: 8e-6 };

    #[test]
    fn in_focus_kernel_is_a_delta() {
        let k = incoherent_kernel(3e-3, 3e-3, 520e-9, &GRID, &MaskSpec::default_circular())
            .unwrap();
        let center = (GRID.height / 2) * GRID.width + GRID.width / 2;
        assert_eq!(k.values[center], 1.0);
        assert!(k.values.iter().enumerate().all(|(i, &v)| i == center || v == 0.0));
    }

    #[test]
    fn kernel_sums_to_one() {
        for dz in [0.5e-3, 2e-3, -3e-3] {
            let k = incoherent_kernel(dz, 0.0, 632e-9, &GRID, &MaskSpec::default_circular())
                .unwrap();
            let total: f64 = k.values.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            assert!(k.values.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn kernel_is_point_symmetric_about_center() {
        let k = incoherent_kernel(2e-3, 0.0, 520e-9, &GRID, &MaskSpec::default_circular())
            .unwrap();
        let (w, h) = (k.width, k.height);
        let (cx, cy) = (w / 2, h / 2);
        for y in 0..h {
            for x in 0..w {
                // Mirror through the center pixel, wrapping at the edges.
                let mx = (2 * cx + w - x) % w;
                let my = (2 * cy + h - y) % h;
                let a = k.values[y * w + x];
                let b = k.values[my * w + mx];
                assert!((a - b).abs() < 1e-12 * (a.abs() + 1.0));
            }
        }
    }

    #[test]
    fn support_grows_with_depth_offset() {
        let near = incoherent_kernel(1e-3, 0.0, 520e-9, &GRID, &MaskSpec::default_circular())
            .unwrap();
        let far = incoherent_kernel(3e-3, 0.0, 520e-9, &GRID, &MaskSpec::default_circular())
            .unwrap();
        assert!(far.support_radius > near.support_radius);
        // Values really are zero outside the stated support.
        let (w, h) = (far.width, far.height);
        let (cx, cy) = ((w / 2) as f64, (h / 2) as f64);
        for y in 0..h {
            for x in 0..w {
                let d = (x as f64 - cx).hypot(y as f64 - cy);
                if d > far.support_radius {
                    assert_eq!(far.values[y * w + x], 0.0);
                }
            }
        }
    }

    #[test]
    fn mask_wider_than_grid_is_rejected() {
        let tiny = KernelGrid { width: 5, height: 5, pitch: 8e-6 };
        let err = incoherent_kernel(50e-3, 0.0, 632e-9, &tiny, &MaskSpec::default_circular());
        assert!(err.is_err());
    }

    #[test]
    fn unmasked_kernel_accepts_any_offset() {
        let tiny = KernelGrid { width: 5, height: 5, pitch: 8e-6 };
        let k = incoherent_kernel(50e-3, 0.0, 632e-9, &tiny, &MaskSpec::None).unwrap();
        assert!((k.values.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn default_angle_matches_sampling_limit() {
        let a = default_max_angle(520e-9, 8e-6);
        assert!((a.sin() - 520e-9 / 16e-6).abs() < 1e-15);
    }

    #[test]
    fn zero_offset_mask_keeps_single_pixel() {
        let m = circular_mask(&GRID, 0.0, 0.1);
        assert_eq!(m.iter().filter(|&&b| b).count(), 1);
        assert!(m[(GRID.height / 2) * GRID.width + GRID.width / 2]);
    }

    #[test]
    fn oversized_mask_keeps_everything() {
        let m = circular_mask(&GRID, 1.0, 1.0);
        assert!(m.iter().all(|&b| b));
    }
}
