//! Wave-optics simulation and optimization engine for time-multiplexed
//! phase-only holograms viewed through an eyepiece.
//!
//! The crate covers the full loop used by the `holo` CLI: incoherent
//! focal-stack rendering from layered depth images, band-limited
//! angular-spectrum propagation with grating orders and pupil filtering,
//! batch hologram optimization with analytic gradients, and evaluation
//! utilities (PSNR reports, focal and eye-box sweeps, slow reference
//! oracles).
//!
//! All lengths are in meters, all phases in radians, and all images are
//! row-major with `y` increasing downward. Heavy loops are data-parallel
//! over independent work items when the `parallel` feature (default) is
//! enabled; disabling it yields a fully sequential build that produces
//! bit-identical results.

pub mod adam;
pub mod engine;
pub mod error;
pub mod exec;
pub mod fft;
pub mod field;
pub mod incoherent;
pub mod io;
pub mod ldi;
pub mod loss;
pub mod metrics;
pub mod optimize;
pub mod oracle;
pub mod propagation;
pub mod pupils;
pub mod reconstruct;
pub mod render;
pub mod simulate;
pub mod visibility;

pub use error::{Error, Result};

/// Optical constants of the display: SLM pixel pitch, laser wavelengths,
/// and the focal length of the eyepiece that maps the hologram spectrum
/// onto the pupil plane.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Optics {
    /// SLM pixel pitch in meters.
    pub pitch: f64,
    /// Laser wavelengths in meters, ordered red, green, blue.
    pub wavelengths: [f64; 3],
    /// Eyepiece focal length in meters.
    pub eyepiece_focal_length: f64,
}

impl Optics {
    /// Pitch 8 um, wavelengths 632/520/450 nm, 80 mm eyepiece.
    pub fn default_display() -> Self {
        Optics {
            pitch: 8e-6,
            wavelengths: [632e-9, 520e-9, 450e-9],
            eyepiece_focal_length: 80e-3,
        }
    }

    /// Width of the exit pupil plane covered by the first grating order at
    /// `wavelength`: lambda * f / pitch.
    pub fn order_extent(&self, wavelength: f64) -> f64 {
        wavelength * self.eyepiece_focal_length / self.pitch
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pitch.is_finite() && self.pitch > 0.0) {
            return Err(Error::invalid("pitch must be positive and finite"));
        }
        if !(self.eyepiece_focal_length.is_finite() && self.eyepiece_focal_length > 0.0) {
            return Err(Error::invalid("eyepiece focal length must be positive"));
        }
        for &w in &self.wavelengths {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::invalid("wavelengths must be positive and finite"));
            }
        }
        Ok(())
    }
}
