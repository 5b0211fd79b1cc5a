//! Eye-view simulation of optimized hologram batches.
//!
//! These helpers pool the frames of a batch into time-averaged
//! amplitude images as an eye placed at a chosen pupil would see them:
//! a plane-by-plane reconstruction, a focus sweep through a depth
//! range, and a quality sweep over pupil positions across the eye box.

use crate::error::{Error, Result};
use crate::loss::{Evaluator, HologramBatch, PupilFilter, ScaleSet};
use crate::metrics::{compare_to_stack, MetricReport};
use crate::pupils::{grid_positions, EyeBox};
use crate::reconstruct::{PupilKind, PupilSpec};
use crate::render::FocalStack;

/// Time-averaged amplitude images on the supersampled reconstruction
/// grid.
#[derive(Debug, Clone)]
pub struct ReconstructedStack {
    width: usize,
    height: usize,
    supersample: usize,
    pitch: f64,
    plane_depths: Vec<f64>,
    /// `amplitudes[plane][channel_slot]`, row-major.
    amplitudes: Vec<Vec<Vec<f64>>>,
}

impl ReconstructedStack {
    /// Width of the reconstruction grid (already supersampled).
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn supersample(&self) -> usize {
        self.supersample
    }

    /// Sample pitch of the reconstruction grid.
    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn plane_depths(&self) -> &[f64] {
        &self.plane_depths
    }

    pub fn channel_count(&self) -> usize {
        self.amplitudes.first().map(Vec::len).unwrap_or_default()
    }

    pub fn amplitude(&self, plane: usize, slot: usize) -> &[f64] {
        &self.amplitudes[plane][slot]
    }

    pub fn amplitudes(&self) -> &[Vec<Vec<f64>>] {
        &self.amplitudes
    }
}

/// Reconstructs the batch at each depth as seen through `pupil`.
pub fn simulate_reconstruction(
    evaluator: &Evaluator,
    batch: &HologramBatch,
    pupil: &PupilFilter,
    plane_depths: &[f64],
    scales: &ScaleSet,
) -> Result<ReconstructedStack> {
    let amplitudes = evaluator.amplitudes(batch, pupil, plane_depths, scales)?;
    let mu = evaluator.config().orders;
    Ok(ReconstructedStack {
        width: batch.width() * mu,
        height: batch.height() * mu,
        supersample: mu,
        pitch: batch.pitch() / mu as f64,
        plane_depths: plane_depths.to_vec(),
        amplitudes,
    })
}

/// Evenly spaced focus positions from `start` to `end` inclusive;
/// descending when `start > end`, the midpoint when `count` is one.
pub fn sweep_depths(start: f64, end: f64, count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::invalid("a sweep needs at least one plane"));
    }
    if !(start.is_finite() && end.is_finite()) {
        return Err(Error::non_finite("sweep bounds must be finite"));
    }
    Ok(grid_positions(start, end, count))
}

/// Focus sweep: reconstructions at `count` evenly spaced depths.
pub fn focal_sweep(
    evaluator: &Evaluator,
    batch: &HologramBatch,
    pupil: &PupilFilter,
    start: f64,
    end: f64,
    count: usize,
    scales: &ScaleSet,
) -> Result<ReconstructedStack> {
    let depths = sweep_depths(start, end, count)?;
    simulate_reconstruction(evaluator, batch, pupil, &depths, scales)
}

/// Reconstruction quality at one pupil position.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EyeboxPoint {
    /// Pupil center within the eye box.
    pub center: [f64; 2],
    pub report: MetricReport,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct EyeboxSweep {
    pub points: Vec<EyeboxPoint>,
    /// Smallest per-position mean PSNR.
    pub min_mean_psnr: f64,
    /// Smallest single (plane, channel) PSNR anywhere on the lattice.
    pub min_psnr: f64,
}

/// Sweeps a `side` x `side` lattice of equal pupils across the eye box
/// (inset by the radius so every disk fits) and scores each position
/// against the stack planes selected by `plane_indices`.
#[allow(clippy::too_many_arguments)]
pub fn eyebox_sweep(
    evaluator: &Evaluator,
    batch: &HologramBatch,
    stack: &FocalStack,
    plane_indices: &[usize],
    channels: &[usize],
    side: usize,
    radius: f64,
    eye_box: &EyeBox,
    laser: &[f64],
) -> Result<EyeboxSweep> {
    if side == 0 {
        return Err(Error::invalid("the lattice needs at least one position"));
    }
    eye_box.validate()?;
    if !eye_box.fits_disk(radius) {
        return Err(Error::invalid("the eye box is too small for the sweep pupils"));
    }
    let plane_indices: Vec<usize> = if plane_indices.is_empty() {
        (0..stack.plane_depths().len()).collect()
    } else {
        plane_indices.to_vec()
    };
    let depths: Vec<f64> = plane_indices
        .iter()
        .map(|&k| {
            stack
                .plane_depths()
                .get(k)
                .copied()
                .ok_or_else(|| Error::invalid(format!("plane index {k} out of range")))
        })
        .collect::<Result<_>>()?;
    let scales = ScaleSet::new(laser.to_vec(), vec![1.0])?;

    let xs = grid_positions(eye_box.x_min + radius, eye_box.x_max - radius, side);
    let ys = grid_positions(eye_box.y_min + radius, eye_box.y_max - radius, side);
    let mut points = Vec::with_capacity(side * side);
    let mut min_mean = f64::INFINITY;
    let mut min_all = f64::INFINITY;
    for &cy in &ys {
        for &cx in &xs {
            let pupil =
                PupilFilter::Disk(PupilSpec::new(cx, cy, radius, PupilKind::Fixed)?);
            let recon =
                simulate_reconstruction(evaluator, batch, &pupil, &depths, &scales)?;
            let report = compare_to_stack(
                stack,
                &plane_indices,
                channels,
                recon.amplitudes(),
                recon.supersample(),
            )?;
            min_mean = min_mean.min(report.mean_psnr);
            min_all = min_all.min(report.min_psnr);
            points.push(EyeboxPoint { center: [cx, cy], report });
        }
    }
    Ok(EyeboxSweep { points, min_mean_psnr: min_mean, min_psnr: min_all })
}
