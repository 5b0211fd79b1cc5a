//! Batch loss evaluation for time-multiplexed phase hologram sets.
//!
//! A [`HologramBatch`] holds the phase frames and global scale of each
//! color channel. [`Evaluator::evaluate`] reconstructs every supervised
//! plane through every pupil, compares the pooled multi-frame amplitude
//! against the target amplitudes, and (optionally) returns exact
//! analytic gradients with respect to every phase pixel and every
//! global scale.
//!
//! The observed quantity is the time-averaged intensity: frames add in
//! intensity, never in field, and the comparison runs on its square
//! root so the residual lives in amplitude units.

use crate::engine::{self, ChannelRequest, EngineRequest};
pub use crate::engine::PairLoss;
use crate::error::{Error, Result};
use crate::field::{FrequencyGrid, PhasePattern};
use crate::fft::FftScalar;
use crate::pupils::pupil_normalization;
use crate::reconstruct::{KernelCache, PupilSpec, TransferKey};
use crate::render::FocalStack;
use num_complex::Complex;
use std::collections::HashMap;
use std::sync::{Arc, RwLock};

/// Residual norm applied to the amplitude difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossNorm {
    L2,
    L1,
}

impl Default for LossNorm {
    fn default() -> Self {
        LossNorm::L2
    }
}

/// How the per-channel global scale enters the displayed field.
///
/// `Amplitude` multiplies the unit carrier, modelling per-channel laser
/// power; `PhaseArgument` scales the phase argument itself instead,
/// which models a miscalibrated modulation depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMode {
    Amplitude,
    PhaseArgument,
}

impl Default for ScaleMode {
    fn default() -> Self {
        ScaleMode::Amplitude
    }
}

/// Floating-point width of the spectral transforms. Gradients are
/// always accumulated in f64 regardless of the transform width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F64,
    F32,
}

impl Default for Precision {
    fn default() -> Self {
        Precision::F64
    }
}

/// Frequency-domain viewing filter: the full band or one pupil disk.
#[derive(Debug, Clone, PartialEq)]
pub enum PupilFilter {
    Open,
    Disk(PupilSpec),
}

/// Phase frames and global scale for one color channel.
#[derive(Debug, Clone)]
pub struct ChannelBatch {
    pub wavelength: f64,
    pub global_scale: f64,
    pub frames: Vec<PhasePattern>,
}

impl ChannelBatch {
    pub fn new(wavelength: f64, global_scale: f64, frames: Vec<PhasePattern>) -> Result<Self> {
        let batch = ChannelBatch { wavelength, global_scale, frames };
        batch.validate()?;
        Ok(batch)
    }

    fn validate(&self) -> Result<()> {
        if !(self.wavelength.is_finite() && self.wavelength > 0.0) {
            return Err(Error::invalid("wavelength must be positive and finite"));
        }
        if !(self.global_scale.is_finite() && self.global_scale > 0.0) {
            return Err(Error::invalid("global scale must be positive and finite"));
        }
        if self.frames.is_empty() {
            return Err(Error::invalid("a channel needs at least one phase frame"));
        }
        let (w, h, p) =
            (self.frames[0].width(), self.frames[0].height(), self.frames[0].pitch());
        for f in &self.frames {
            if f.width() != w || f.height() != h || f.pitch() != p {
                return Err(Error::mismatch("phase frames within a channel must share shape"));
            }
        }
        Ok(())
    }
}

/// The full optimizable state: per-channel frame sets over a shared
/// grid.
#[derive(Debug, Clone)]
pub struct HologramBatch {
    channels: Vec<ChannelBatch>,
}

impl HologramBatch {
    pub fn new(channels: Vec<ChannelBatch>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::invalid("a hologram batch needs at least one channel"));
        }
        for c in &channels {
            c.validate()?;
        }
        let first = &channels[0].frames[0];
        let (w, h, p, t) =
            (first.width(), first.height(), first.pitch(), channels[0].frames.len());
        for c in &channels {
            if c.frames.len() != t {
                return Err(Error::mismatch("all channels must hold the same frame count"));
            }
            let f = &c.frames[0];
            if f.width() != w || f.height() != h || f.pitch() != p {
                return Err(Error::mismatch("all channels must share the hologram grid"));
            }
        }
        Ok(HologramBatch { channels })
    }

    pub fn width(&self) -> usize {
        self.channels[0].frames[0].width()
    }

    pub fn height(&self) -> usize {
        self.channels[0].frames[0].height()
    }

    pub fn pitch(&self) -> f64 {
        self.channels[0].frames[0].pitch()
    }

    pub fn frame_count(&self) -> usize {
        self.channels[0].frames.len()
    }

    pub fn channels(&self) -> &[ChannelBatch] {
        &self.channels
    }

    pub fn channels_mut(&mut self) -> &mut [ChannelBatch] {
        &mut self.channels
    }

    /// The batch after an 8-bit phase quantization round trip, as a
    /// display with 256 phase levels would show it.
    pub fn quantized(&self) -> Self {
        HologramBatch {
            channels: self
                .channels
                .iter()
                .map(|c| ChannelBatch {
                    wavelength: c.wavelength,
                    global_scale: c.global_scale,
                    frames: c.frames.iter().map(|f| f.quantized()).collect(),
                })
                .collect(),
        }
    }
}

/// Per-pixel laser amplitude profile and per-pupil output scales.
#[derive(Debug, Clone)]
pub struct ScaleSet {
    /// Source amplitude per hologram pixel; unit mean for a calibrated
    /// profile.
    pub laser: Vec<f64>,
    /// Normalization applied to each reconstructed amplitude before the
    /// target comparison.
    pub pupil_scales: Vec<f64>,
}

impl ScaleSet {
    pub fn new(laser: Vec<f64>, pupil_scales: Vec<f64>) -> Result<Self> {
        if !laser.iter().all(|&v| v.is_finite() && v > 0.0) {
            return Err(Error::invalid("laser profile values must be positive and finite"));
        }
        if pupil_scales.is_empty()
            || !pupil_scales.iter().all(|&v| v.is_finite() && v > 0.0)
        {
            return Err(Error::invalid("pupil scales must be positive and finite"));
        }
        Ok(ScaleSet { laser, pupil_scales })
    }

    /// Uniform laser, unit scales.
    pub fn uniform(width: usize, height: usize, pupil_count: usize) -> Self {
        ScaleSet { laser: vec![1.0; width * height], pupil_scales: vec![1.0; pupil_count] }
    }

    /// Builds the pupil scale column for `pupils`: the radius ratio to
    /// `base_radius` when `normalize` is set (open filters stay at 1),
    /// unit otherwise.
    pub fn for_pupils(
        laser: Vec<f64>,
        pupils: &[PupilFilter],
        base_radius: f64,
        normalize: bool,
    ) -> Result<Self> {
        let scales = pupils
            .iter()
            .map(|f| match f {
                PupilFilter::Open => 1.0,
                PupilFilter::Disk(p) => pupil_normalization(p, base_radius, normalize),
            })
            .collect();
        Self::new(laser, scales)
    }
}

/// Target amplitudes per channel and supervised plane, base resolution.
#[derive(Debug, Clone)]
pub struct SupervisedTargets {
    width: usize,
    height: usize,
    plane_depths: Vec<f64>,
    /// `amplitudes[channel][plane][pixel]`.
    amplitudes: Vec<Vec<Vec<f64>>>,
}

impl SupervisedTargets {
    pub fn new(
        width: usize,
        height: usize,
        plane_depths: Vec<f64>,
        amplitudes: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        if plane_depths.is_empty() {
            return Err(Error::invalid("at least one supervised plane is required"));
        }
        if !plane_depths.iter().all(|d| d.is_finite()) {
            return Err(Error::non_finite("plane depths must be finite"));
        }
        if amplitudes.is_empty() {
            return Err(Error::invalid("at least one target channel is required"));
        }
        for chan in &amplitudes {
            if chan.len() != plane_depths.len() {
                return Err(Error::mismatch("per-channel plane count must match depths"));
            }
            for img in chan {
                if img.len() != width * height {
                    return Err(Error::mismatch("target image size must match the grid"));
                }
                if !img.iter().all(|&v| v.is_finite() && v >= 0.0) {
                    return Err(Error::invalid(
                        "target amplitudes must be finite and non-negative",
                    ));
                }
            }
        }
        Ok(SupervisedTargets { width, height, plane_depths, amplitudes })
    }

    /// Square-root amplitude targets from a rendered intensity stack,
    /// restricted to `plane_indices` and the given stack channels (one
    /// per batch channel, in batch order).
    pub fn from_stack(
        stack: &FocalStack,
        plane_indices: &[usize],
        channels: &[usize],
    ) -> Result<Self> {
        if plane_indices.is_empty() {
            return Err(Error::invalid("at least one supervised plane is required"));
        }
        for &k in plane_indices {
            if k >= stack.plane_depths().len() {
                return Err(Error::invalid(format!(
                    "plane index {} out of range for a stack of {}",
                    k,
                    stack.plane_depths().len()
                )));
            }
        }
        if channels.is_empty() || channels.iter().any(|&c| c >= 3) {
            return Err(Error::invalid("stack channels must come from 0..3"));
        }
        let depths: Vec<f64> =
            plane_indices.iter().map(|&k| stack.plane_depths()[k]).collect();
        let amplitudes = channels
            .iter()
            .map(|&c| {
                plane_indices
                    .iter()
                    .map(|&k| {
                        stack
                            .channel_image(k, c)
                            .iter()
                            .map(|&v| v.max(0.0).sqrt())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self::new(stack.width(), stack.height(), depths, amplitudes)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn plane_depths(&self) -> &[f64] {
        &self.plane_depths
    }

    pub fn channel_count(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitude(&self, channel: usize, plane: usize) -> &[f64] {
        &self.amplitudes[channel][plane]
    }
}

/// Settings shared by every evaluation in a run.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalConfig {
    /// Eyepiece focal length mapping pupil geometry into frequency.
    pub focal_length: f64,
    /// Grating orders kept per axis; odd.
    pub orders: usize,
    /// Whether to apply the pixel-aperture falloff across orders.
    pub apply_envelope: bool,
    pub scale_mode: ScaleMode,
    pub loss_norm: LossNorm,
    pub precision: Precision,
    /// Intensities at or below this floor keep a zero amplitude
    /// gradient, avoiding the square-root singularity.
    pub intensity_floor: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            focal_length: 80e-3,
            orders: 3,
            apply_envelope: true,
            scale_mode: ScaleMode::default(),
            loss_norm: LossNorm::default(),
            precision: Precision::default(),
            intensity_floor: 1e-12,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.focal_length.is_finite() && self.focal_length > 0.0) {
            return Err(Error::invalid("focal length must be positive and finite"));
        }
        if self.orders == 0 || self.orders % 2 == 0 {
            return Err(Error::invalid("order count must be odd and nonzero"));
        }
        if !(self.intensity_floor.is_finite() && self.intensity_floor > 0.0) {
            return Err(Error::invalid("intensity floor must be positive and finite"));
        }
        Ok(())
    }
}

/// Gradients for every optimizable quantity in a batch.
#[derive(Debug, Clone)]
pub struct BatchGradient {
    /// `phase[channel][frame][pixel]`.
    pub phase: Vec<Vec<Vec<f64>>>,
    /// One per channel.
    pub global_scale: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub loss: f64,
    /// One entry per (channel, plane, pupil) triple; their mean is the
    /// loss.
    pub per_pair: Vec<PairLoss>,
    pub gradient: Option<BatchGradient>,
}

/// Reusable evaluation context: shared transfer tables survive across
/// iterations so each (plane, wavelength) kernel is built once.
pub struct Evaluator {
    config: EvalConfig,
    cache: Arc<KernelCache>,
    single: RwLock<HashMap<TransferKey, Arc<Vec<Complex<f32>>>>>,
}

impl Evaluator {
    pub fn new(config: EvalConfig) -> Result<Self> {
        Self::with_cache(config, Arc::new(KernelCache::new()))
    }

    pub fn with_cache(config: EvalConfig, cache: Arc<KernelCache>) -> Result<Self> {
        config.validate()?;
        Ok(Evaluator { config, cache, single: RwLock::new(HashMap::new()) })
    }

    pub fn config(&self) -> &EvalConfig {
        &self.config
    }

    pub fn cache(&self) -> &Arc<KernelCache> {
        &self.cache
    }

    fn transfer_f64(
        &self,
        grid: &FrequencyGrid,
        wavelength: f64,
        distance: f64,
    ) -> Result<Arc<Vec<Complex<f64>>>> {
        self.cache.transfer(grid, wavelength, distance, self.config.apply_envelope)
    }

    fn transfer_f32(
        &self,
        grid: &FrequencyGrid,
        wavelength: f64,
        distance: f64,
    ) -> Result<Arc<Vec<Complex<f32>>>> {
        let key = TransferKey::new(grid, wavelength, distance, self.config.apply_envelope);
        if let Some(hit) = self.single.read().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let full = self.transfer_f64(grid, wavelength, distance)?;
        let narrow: Arc<Vec<Complex<f32>>> = Arc::new(
            full.iter().map(|v| Complex::new(v.re as f32, v.im as f32)).collect(),
        );
        let mut map = self.single.write().unwrap();
        Ok(map.entry(key).or_insert(narrow).clone())
    }

    fn validate_inputs(
        &self,
        batch: &HologramBatch,
        pupils: &[PupilFilter],
        targets: &SupervisedTargets,
        scales: &ScaleSet,
    ) -> Result<()> {
        if pupils.is_empty() {
            return Err(Error::invalid("at least one pupil filter is required"));
        }
        if targets.channel_count() != batch.channels().len() {
            return Err(Error::mismatch("target channel count must match the batch"));
        }
        if targets.width() != batch.width() || targets.height() != batch.height() {
            return Err(Error::mismatch("target resolution must match the hologram grid"));
        }
        if scales.laser.len() != batch.width() * batch.height() {
            return Err(Error::mismatch("laser profile size must match the hologram grid"));
        }
        if scales.pupil_scales.len() != pupils.len() {
            return Err(Error::mismatch("one pupil scale per pupil filter is required"));
        }
        Ok(())
    }

    fn build_request<'a, T: FftScalar>(
        &self,
        batch: &'a HologramBatch,
        pupils: &'a [PupilFilter],
        depths: &[f64],
        target_for: impl Fn(usize, usize) -> &'a [f64],
        scales: &'a ScaleSet,
        transfer: impl Fn(&FrequencyGrid, f64, f64) -> Result<Arc<Vec<Complex<T>>>>,
    ) -> Result<EngineRequest<'a, T>> {
        let grid = FrequencyGrid::supersampled(
            batch.width(),
            batch.height(),
            batch.pitch(),
            self.config.orders,
        )?;
        let mut channels = Vec::with_capacity(batch.channels().len());
        for (ci, chan) in batch.channels().iter().enumerate() {
            let transfers = depths
                .iter()
                .map(|&d| transfer(&grid, chan.wavelength, d))
                .collect::<Result<Vec<_>>>()?;
            channels.push(ChannelRequest {
                wavelength: chan.wavelength,
                global_scale: chan.global_scale,
                frames: chan.frames.iter().map(|f| f.values()).collect(),
                targets: (0..depths.len()).map(|k| target_for(ci, k)).collect(),
                transfers,
            });
        }
        Ok(EngineRequest {
            width: batch.width(),
            height: batch.height(),
            pitch: batch.pitch(),
            orders: self.config.orders,
            focal_length: self.config.focal_length,
            channels,
            pupils,
            pupil_scales: &scales.pupil_scales,
            laser: &scales.laser,
            scale_mode: self.config.scale_mode,
            loss_norm: self.config.loss_norm,
            intensity_floor: self.config.intensity_floor,
        })
    }

    /// Loss over every (channel, plane, pupil) triple, with gradients
    /// when `want_gradient` is set.
    pub fn evaluate(
        &self,
        batch: &HologramBatch,
        pupils: &[PupilFilter],
        targets: &SupervisedTargets,
        scales: &ScaleSet,
        want_gradient: bool,
    ) -> Result<Evaluation> {
        self.validate_inputs(batch, pupils, targets, scales)?;
        let depths = targets.plane_depths().to_vec();
        let out = match self.config.precision {
            Precision::F64 => {
                let req = self.build_request::<f64>(
                    batch,
                    pupils,
                    &depths,
                    |c, k| targets.amplitude(c, k),
                    scales,
                    |g, l, d| self.transfer_f64(g, l, d),
                )?;
                engine::run(&req, want_gradient)?
            }
            Precision::F32 => {
                let req = self.build_request::<f32>(
                    batch,
                    pupils,
                    &depths,
                    |c, k| targets.amplitude(c, k),
                    scales,
                    |g, l, d| self.transfer_f32(g, l, d),
                )?;
                engine::run(&req, want_gradient)?
            }
        };
        let gradient = match (out.phase_grads, out.scale_grads) {
            (Some(phase), Some(global_scale)) => {
                Some(BatchGradient { phase, global_scale })
            }
            _ => None,
        };
        Ok(Evaluation { loss: out.loss, per_pair: out.per_pair, gradient })
    }

    /// Forward loss only.
    pub fn forward_loss(
        &self,
        batch: &HologramBatch,
        pupils: &[PupilFilter],
        targets: &SupervisedTargets,
        scales: &ScaleSet,
    ) -> Result<f64> {
        Ok(self.evaluate(batch, pupils, targets, scales, false)?.loss)
    }

    /// Pooled eye-view amplitude of each plane depth through a single
    /// pupil, on the supersampled grid: `amplitudes[plane][channel]` in
    /// row-major order.
    pub fn amplitudes(
        &self,
        batch: &HologramBatch,
        pupil: &PupilFilter,
        plane_depths: &[f64],
        scales: &ScaleSet,
    ) -> Result<Vec<Vec<Vec<f64>>>> {
        if plane_depths.is_empty() {
            return Err(Error::invalid("at least one plane depth is required"));
        }
        if !plane_depths.iter().all(|d| d.is_finite()) {
            return Err(Error::non_finite("plane depths must be finite"));
        }
        if scales.laser.len() != batch.width() * batch.height() {
            return Err(Error::mismatch("laser profile size must match the hologram grid"));
        }
        if scales.pupil_scales.len() != 1 {
            return Err(Error::mismatch("amplitude reconstruction expects one pupil scale"));
        }
        let pupils = std::slice::from_ref(pupil);
        static EMPTY: [f64; 0] = [];
        match self.config.precision {
            Precision::F64 => {
                let req = self.build_request::<f64>(
                    batch,
                    pupils,
                    plane_depths,
                    |_, _| &EMPTY,
                    scales,
                    |g, l, d| self.transfer_f64(g, l, d),
                )?;
                engine::amplitudes(&req)
            }
            Precision::F32 => {
                let req = self.build_request::<f32>(
                    batch,
                    pupils,
                    plane_depths,
                    |_, _| &EMPTY,
                    scales,
                    |g, l, d| self.transfer_f32(g, l, d),
                )?;
                engine::amplitudes(&req)
            }
        }
    }
}
