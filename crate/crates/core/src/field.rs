//! Sampled complex fields, phase patterns, and the frequency grids that
//! describe their spectra.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::TAU;

/// Signed DFT bin index for bin `i` of an `n`-point transform in natural
/// order: `0..=(n-1)/2` map to themselves, the rest wrap to negatives.
pub fn signed_bin(i: usize, n: usize) -> i64 {
    debug_assert!(i < n);
    if i < n.div_ceil(2) {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Frequency-domain sampling of a field: the base grid dimensions and
/// pitch fix the bin spacing `1 / (n * pitch)`, while `supersample`
/// widens the grid to `supersample * n` bins at unchanged spacing (the
/// layout produced by grating-order replication).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    base_width: usize,
    base_height: usize,
    pitch: f64,
    supersample: usize,
}

impl FrequencyGrid {
    pub fn new(base_width: usize, base_height: usize, pitch: f64) -> Result<Self> {
        Self::supersampled(base_width, base_height, pitch, 1)
    }

    pub fn supersampled(
        base_width: usize,
        base_height: usize,
        pitch: f64,
        supersample: usize,
    ) -> Result<Self> {
        if base_width == 0 || base_height == 0 {
            return Err(Error::invalid("frequency grid dimensions must be nonzero"));
        }
        if !(pitch.is_finite() && pitch > 0.0) {
            return Err(Error::invalid("pitch must be positive and finite"));
        }
        if supersample == 0 {
            return Err(Error::invalid("supersample factor must be nonzero"));
        }
        Ok(FrequencyGrid { base_width, base_height, pitch, supersample })
    }

    pub fn base_width(&self) -> usize {
        self.base_width
    }

    pub fn base_height(&self) -> usize {
        self.base_height
    }

    /// Number of frequency bins along x.
    pub fn width(&self) -> usize {
        self.base_width * self.supersample
    }

    /// Number of frequency bins along y.
    pub fn height(&self) -> usize {
        self.base_height * self.supersample
    }

    pub fn len(&self) -> usize {
        self.width() * self.height()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn supersample(&self) -> usize {
        self.supersample
    }

    /// Spatial pitch of the base grid in meters.
    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    /// Spatial pitch of the (possibly supersampled) sample grid.
    pub fn sample_pitch(&self) -> f64 {
        self.pitch() / self.supersample as f64
    }

    /// Frequency bin spacing along x in cycles per meter.
    pub fn step_x(&self) -> f64 {
        1.0 / (self.base_width as f64 * self.pitch())
    }

    /// Frequency bin spacing along y in cycles per meter.
    pub fn step_y(&self) -> f64 {
        1.0 / (self.base_height as f64 * self.pitch())
    }

    /// Spatial frequency of bin column `col` (natural order).
    pub fn fx(&self, col: usize) -> f64 {
        signed_bin(col, self.width()) as f64 * self.step_x()
    }

    /// Spatial frequency of bin row `row` (natural order).
    pub fn fy(&self, row: usize) -> f64 {
        signed_bin(row, self.height()) as f64 * self.step_y()
    }
}

/// A sampled complex wave field on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    width: usize,
    height: usize,
    pitch: f64,
    wavelength: f64,
    data: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(
        width: usize,
        height: usize,
        pitch: f64,
        wavelength: f64,
        data: Vec<Complex64>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("field dimensions must be nonzero"));
        }
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "field data length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if !(pitch.is_finite() && pitch > 0.0) {
            return Err(Error::invalid("pitch must be positive and finite"));
        }
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::invalid("wavelength must be positive and finite"));
        }
        Ok(ComplexField { width, height, pitch, wavelength, data })
    }

    pub fn zeros(width: usize, height: usize, pitch: f64, wavelength: f64) -> Result<Self> {
        Self::new(width, height, pitch, wavelength, vec![Complex64::new(0.0, 0.0); width * height])
    }

    /// A unit impulse at pixel `(x, y)`.
    pub fn impulse(
        width: usize,
        height: usize,
        pitch: f64,
        wavelength: f64,
        x: usize,
        y: usize,
    ) -> Result<Self> {
        if x >= width || y >= height {
            return Err(Error::invalid("impulse position outside the grid"));
        }
        let mut f = Self::zeros(width, height, pitch, wavelength)?;
        f.data[y * width + x] = Complex64::new(1.0, 0.0);
        Ok(f)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn get(&self, x: usize, y: usize) -> Complex64 {
        self.data[y * self.width + x]
    }

    /// Total energy: the sum of squared magnitudes over all samples.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn validate_finite(&self) -> Result<()> {
        if self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            Ok(())
        } else {
            Err(Error::non_finite("field contains NaN or infinite samples"))
        }
    }
}

/// Number of quantization levels of an 8-bit phase SLM.
pub const PHASE_LEVELS: u32 = 256;

/// A phase-only SLM pattern in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePattern {
    width: usize,
    height: usize,
    pitch: f64,
    values: Vec<f64>,
}

impl PhasePattern {
    pub fn new(width: usize, height: usize, pitch: f64, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("phase pattern dimensions must be nonzero"));
        }
        if values.len() != width * height {
            return Err(Error::invalid(format!(
                "phase data length {} does not match {}x{}",
                values.len(),
                width,
                height
            )));
        }
        if !(pitch.is_finite() && pitch > 0.0) {
            return Err(Error::invalid("pitch must be positive and finite"));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::non_finite("phase pattern contains NaN or infinite values"));
        }
        Ok(PhasePattern { width, height, pitch, values })
    }

    pub fn zeros(width: usize, height: usize, pitch: f64) -> Result<Self> {
        Self::new(width, height, pitch, vec![0.0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Phase value wrapped into `[0, 2*pi)`.
    pub fn wrapped(value: f64) -> f64 {
        let v = value.rem_euclid(TAU);
        // rem_euclid can return TAU itself when rounding up from just below.
        if v >= TAU {
            0.0
        } else {
            v
        }
    }

    /// Rounds each phase to the nearest of 256 levels over one period.
    pub fn quantize(&self) -> Vec<u8> {
        self.values
            .iter()
            .map(|&v| {
                let step = TAU / PHASE_LEVELS as f64;
                (Self::wrapped(v) / step).round() as u32 % PHASE_LEVELS
            })
            .map(|q| q as u8)
            .collect()
    }

    pub fn from_quantized(
        width: usize,
        height: usize,
        pitch: f64,
        levels: &[u8],
    ) -> Result<Self> {
        let step = TAU / PHASE_LEVELS as f64;
        Self::new(width, height, pitch, levels.iter().map(|&q| q as f64 * step).collect())
    }

    /// The same pattern after an 8-bit quantization round trip.
    pub fn quantized(&self) -> Self {
        Self::from_quantized(self.width, self.height, self.pitch, &self.quantize())
            .expect("round trip preserves dimensions")
    }
}
