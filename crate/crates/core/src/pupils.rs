//! Pupil placement over the eye box: a fixed coverage grid plus random
//! draws refreshed every iteration.
//!
//! The fixed pupils pin image quality across the whole box; the random
//! pupils vary center and radius between iterations so quality does not
//! collapse between lattice sites. Draws are reproducible: the same seed
//! and iteration always yield the same pupil list.

use crate::error::{Error, Result};
use crate::reconstruct::{PupilKind, PupilSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Axis-aligned eye box on the exit-pupil plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EyeBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl EyeBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let b = EyeBox { x_min, y_min, x_max, y_max };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [self.x_min, self.y_min, self.x_max, self.y_max];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("eye box bounds must be finite"));
        }
        if self.x_max <= self.x_min || self.y_max <= self.y_min {
            return Err(Error::invalid("eye box must have positive extent"));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    /// Whether a disk of `radius` fits inside the box at some position.
    pub fn fits_disk(&self, radius: f64) -> bool {
        2.0 * radius <= self.width() && 2.0 * radius <= self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)
    }
}

/// How many pupils to place and where.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PupilSetConfig {
    /// Total pupils per iteration, `fixed + random`.
    pub total: usize,
    /// Count of grid pupils; must be a perfect square (or zero).
    pub fixed: usize,
    /// Count of freshly drawn pupils per iteration.
    pub random: usize,
    /// Radius of fixed pupils and reference radius for random ones.
    pub base_radius: f64,
    pub eye_box: EyeBox,
}

impl PupilSetConfig {
    pub fn validate(&self) -> Result<()> {
        self.eye_box.validate()?;
        if self.total == 0 {
            return Err(Error::invalid("at least one pupil is required"));
        }
        if self.fixed + self.random != self.total {
            return Err(Error::invalid(format!(
                "pupil counts are inconsistent: {} fixed + {} random != {} total",
                self.fixed, self.random, self.total
            )));
        }
        if self.fixed > 0 {
            let side = (self.fixed as f64).sqrt().round() as usize;
            if side * side != self.fixed {
                return Err(Error::invalid(format!(
                    "fixed pupil count {} is not a perfect square",
                    self.fixed
                )));
            }
        }
        if !(self.base_radius.is_finite() && self.base_radius > 0.0) {
            return Err(Error::invalid("pupil radius must be positive"));
        }
        if !self.eye_box.fits_disk(self.base_radius) {
            return Err(Error::invalid(
                "eye box is too small to contain a pupil of the base radius",
            ));
        }
        Ok(())
    }

    /// 9 fixed + 16 random pupils of 2 mm radius over an 8 mm eye box.
    pub fn default_eye_box() -> Self {
        PupilSetConfig {
            total: 25,
            fixed: 9,
            random: 16,
            base_radius: 2e-3,
            eye_box: EyeBox { x_min: -4e-3, y_min: -4e-3, x_max: 4e-3, y_max: 4e-3 },
        }
    }
}

pub(crate) fn grid_positions(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![(lo + hi) / 2.0];
    }
    (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
}

fn draw_in(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        (lo + hi) / 2.0
    }
}

/// The pupil list for one iteration: the fixed grid (row-major, inset by
/// the base radius so every disk fits) followed by `random` draws whose
/// centers are uniform over the inset box and whose radii are uniform in
/// `[base/2, 2*base]`, clamped back inside the eye box.
pub fn sample_pupils(
    config: &PupilSetConfig,
    iteration: u64,
    seed: u64,
) -> Result<Vec<PupilSpec>> {
    config.validate()?;
    let b = config.eye_box;
    let r = config.base_radius;
    let mut pupils = Vec::with_capacity(config.total);

    if config.fixed > 0 {
        let side = (config.fixed as f64).sqrt().round() as usize;
        let xs = grid_positions(b.x_min + r, b.x_max - r, side);
        let ys = grid_positions(b.y_min + r, b.y_max - r, side);
        for &cy in &ys {
            for &cx in &xs {
                pupils.push(PupilSpec::new(cx, cy, r, PupilKind::Fixed)?);
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration);
    for _ in 0..config.random {
        let cx = draw_in(&mut rng, b.x_min + r, b.x_max - r);
        let cy = draw_in(&mut rng, b.y_min + r, b.y_max - r);
        let radius = draw_in(&mut rng, r / 2.0, 2.0 * r);
        // A larger draw may stick out of the box; pull it back inside.
        let (cx, cy) = if b.fits_disk(radius) {
            (
                cx.clamp(b.x_min + radius, b.x_max - radius),
                cy.clamp(b.y_min + radius, b.y_max - radius),
            )
        } else {
            b.center()
        };
        pupils.push(PupilSpec::new(cx, cy, radius, PupilKind::Random)?);
    }
    Ok(pupils)
}

/// Per-pupil loss normalization: pupils gather energy roughly with their
/// area, so amplitudes are divided by `radius / base_radius` when
/// enabled.
pub fn pupil_normalization(pupil: &PupilSpec, base_radius: f64, enabled: bool) -> f64 {
    if enabled {
        pupil.radius / base_radius
    } else {
        1.0
    }
}
