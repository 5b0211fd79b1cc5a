//! Grating-order spectrum replication, the pixel-aperture envelope, and
//! pupil-filtered reconstruction behind the eyepiece.
//!
//! A pixelated SLM diffracts copies of the base spectrum at multiples of
//! `1/pitch`. Keeping the central `orders x orders` block of copies on a
//! widened frequency grid models what actually reaches the exit pupil;
//! the square pixel aperture weights every copy with a separable sinc
//! envelope whose nulls fall exactly on the replica centers.

use crate::error::{Error, Result};
use crate::fft::fft2;
use crate::field::{ComplexField, FrequencyGrid, PhasePattern};
use crate::propagation::coherent_kernel;
use num_complex::Complex64;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, RwLock};

/// A complex spectrum in natural bin order together with its grid.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub grid: FrequencyGrid,
    pub values: Vec<Complex64>,
}

/// Transforms the unit-amplitude phase carrier `exp(i*phase)` and tiles
/// its spectrum over the central `orders x orders` grating orders.
///
/// `orders` must be odd so the replica block is centered; `orders == 1`
/// is the plain base spectrum. On the widened grid the replication is a
/// periodic tiling: bin `(r, c)` holds base bin `(r % h, c % w)`.
pub fn high_order_spectrum(phase: &PhasePattern, orders: usize) -> Result<Spectrum> {
    if orders == 0 || orders % 2 == 0 {
        return Err(Error::invalid(format!("orders must be odd, got {orders}")));
    }
    let (w, h) = (phase.width(), phase.height());
    let mut base: Vec<Complex64> =
        phase.values().iter().map(|&p| Complex64::new(p.cos(), p.sin())).collect();
    fft2(&mut base, h, w, false);

    let grid = FrequencyGrid::supersampled(w, h, phase.pitch(), orders)?;
    let (gw, gh) = (grid.width(), grid.height());
    let mut values = vec![Complex64::new(0.0, 0.0); gw * gh];
    for row in 0..gh {
        let src_row = (row % h) * w;
        let dst_row = row * gw;
        for col in 0..gw {
            values[dst_row + col] = base[src_row + col % w];
        }
    }
    Ok(Spectrum { grid, values })
}

/// Separable pixel-aperture weight `sinc(pi*fx*p) * sinc(pi*fy*p)` on
/// every bin of `grid`, where `p` is the base pitch.
pub fn sinc_envelope(grid: &FrequencyGrid) -> Vec<f64> {
    fn sinc(x: f64) -> f64 {
        if x == 0.0 {
            1.0
        } else {
            x.sin() / x
        }
    }
    let (w, h) = (grid.width(), grid.height());
    let pitch = grid.pitch();
    let col_w: Vec<f64> = (0..w).map(|c| sinc(PI * grid.fx(c) * pitch)).collect();
    let mut out = vec![0.0; w * h];
    for row in 0..h {
        let row_w = sinc(PI * grid.fy(row) * pitch);
        for col in 0..w {
            out[row * w + col] = row_w * col_w[col];
        }
    }
    out
}

/// How a pupil entered the optimization set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum PupilKind {
    Fixed,
    Random,
}

/// A circular viewing pupil on the exit-pupil plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PupilSpec {
    /// Pupil center relative to the optical axis.
    pub center: [f64; 2],
    pub radius: f64,
    pub kind: PupilKind,
}

impl PupilSpec {
    pub fn new(center_x: f64, center_y: f64, radius: f64, kind: PupilKind) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid("pupil radius must be positive and finite"));
        }
        if !(center_x.is_finite() && center_y.is_finite()) {
            return Err(Error::invalid("pupil center must be finite"));
        }
        Ok(PupilSpec { center: [center_x, center_y], radius, kind })
    }

    /// Pupil circle mapped to spatial frequency: center and radius divided
    /// by `lambda * f`.
    pub fn frequency_circle(&self, wavelength: f64, focal_length: f64) -> ([f64; 2], f64) {
        let s = wavelength * focal_length;
        ([self.center[0] / s, self.center[1] / s], self.radius / s)
    }
}

/// Binary mask selecting the bins strictly inside the pupil circle after
/// mapping it through the eyepiece. The same physical iris therefore cuts
/// a different frequency disk for every wavelength. Logs a warning when
/// the disk reaches past the representable band instead of failing.
pub fn pupil_mask(
    grid: &FrequencyGrid,
    pupil: &PupilSpec,
    wavelength: f64,
    focal_length: f64,
) -> Vec<bool> {
    let ([cx, cy], radius) = pupil.frequency_circle(wavelength, focal_length);
    let (w, h) = (grid.width(), grid.height());
    let half_w = grid.step_x() * (w as f64 / 2.0);
    let half_h = grid.step_y() * (h as f64 / 2.0);
    if cx.abs() + radius > half_w || cy.abs() + radius > half_h {
        log::warn!(
            "pupil at ({:.2e}, {:.2e}) m radius {:.2e} m exceeds the grid band at lambda {:.0} nm",
            pupil.center[0],
            pupil.center[1],
            pupil.radius,
            wavelength * 1e9,
        );
    }
    let r2 = radius * radius;
    let mut mask = vec![false; w * h];
    for row in 0..h {
        let dy = grid.fy(row) - cy;
        for col in 0..w {
            let dx = grid.fx(col) - cx;
            mask[row * w + col] = dx * dx + dy * dy < r2;
        }
    }
    mask
}

/// Settings shared by every reconstruction of one display configuration.
#[derive(Debug, Clone, Copy)]
pub struct ReconstructSettings {
    pub wavelength: f64,
    pub eyepiece_focal_length: f64,
    /// Odd count of grating orders kept along each axis.
    pub orders: usize,
    /// Apply the pixel-aperture sinc envelope to the tiled spectrum.
    pub apply_envelope: bool,
}

/// Coherent field at `distance` meters from the SLM as seen through
/// `pupil` (or the full band when `pupil` is `None`): tile the carrier
/// spectrum over grating orders, weight by the aperture envelope,
/// propagate, mask to the pupil, and return to the spatial domain on the
/// supersampled grid.
pub fn reconstruct_plane(
    phase: &PhasePattern,
    pupil: Option<&PupilSpec>,
    distance: f64,
    settings: &ReconstructSettings,
) -> Result<ComplexField> {
    let spectrum = high_order_spectrum(phase, settings.orders)?;
    let grid = spectrum.grid;
    let kernel = coherent_kernel(&grid, settings.wavelength, distance)?;
    let envelope =
        if settings.apply_envelope { Some(sinc_envelope(&grid)) } else { None };
    let mask = pupil.map(|p| {
        pupil_mask(&grid, p, settings.wavelength, settings.eyepiece_focal_length)
    });

    let mut values = spectrum.values;
    for (i, v) in values.iter_mut().enumerate() {
        if let Some(m) = &mask {
            if !m[i] {
                *v = Complex64::new(0.0, 0.0);
                continue;
            }
        }
        *v *= kernel.values()[i];
        if let Some(env) = &envelope {
            *v *= env[i];
        }
    }
    let (gw, gh) = (grid.width(), grid.height());
    fft2(&mut values, gh, gw, true);
    ComplexField::new(gw, gh, grid.sample_pitch(), settings.wavelength, values)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) struct TransferKey {
    pub distance_bits: u64,
    pub wavelength_bits: u64,
    pub base_width: usize,
    pub base_height: usize,
    pub pitch_bits: u64,
    pub supersample: usize,
    pub envelope: bool,
}

impl TransferKey {
    pub fn new(grid: &FrequencyGrid, wavelength: f64, distance: f64, envelope: bool) -> Self {
        TransferKey {
            distance_bits: distance.to_bits(),
            wavelength_bits: wavelength.to_bits(),
            base_width: grid.base_width(),
            base_height: grid.base_height(),
            pitch_bits: grid.pitch().to_bits(),
            supersample: grid.supersample(),
            envelope,
        }
    }
}

/// Memoized propagation transfer functions, optionally folded with the
/// aperture envelope, keyed by exact distance, wavelength, and grid.
///
/// Entries are immutable once computed and shared behind `Arc`, so the
/// cache can be read concurrently from worker threads; it can also be
/// persisted to a binary sidecar file (see [`crate::io::cache`]).
#[derive(Debug, Default)]
pub struct KernelCache {
    pub(crate) entries: RwLock<HashMap<TransferKey, Arc<Vec<Complex64>>>>,
}

impl KernelCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The transfer function (kernel times optional envelope) for one
    /// plane, computed on first use and shared afterwards.
    pub fn transfer(
        &self,
        grid: &FrequencyGrid,
        wavelength: f64,
        distance: f64,
        envelope: bool,
    ) -> Result<Arc<Vec<Complex64>>> {
        let key = TransferKey::new(grid, wavelength, distance, envelope);
        if let Some(hit) = self.entries.read().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let kernel = coherent_kernel(grid, wavelength, distance)?;
        let mut values = kernel.values().to_vec();
        if envelope {
            for (v, e) in values.iter_mut().zip(sinc_envelope(grid)) {
                *v *= e;
            }
        }
        let arc = Arc::new(values);
        self.entries.write().unwrap().entry(key).or_insert_with(|| arc.clone());
        Ok(arc)
    }
}
