//! Image-quality metrics for reconstructed focal stacks.
//!
//! Reconstructions live on the supersampled grid while targets are
//! rendered at base resolution, so targets are block-replicated before
//! comparison. PSNR uses the per-channel target peak over all compared
//! planes as the reference level.

use crate::error::{Error, Result};
use crate::render::FocalStack;

/// Peak signal-to-noise ratio in decibels between two equally sized
/// images; infinite when they agree exactly.
pub fn psnr(reference: &[f64], test: &[f64], peak: f64) -> Result<f64> {
    if reference.is_empty() || reference.len() != test.len() {
        return Err(Error::mismatch("PSNR inputs must share a nonzero size"));
    }
    if !(peak.is_finite() && peak > 0.0) {
        return Err(Error::invalid("PSNR peak must be positive and finite"));
    }
    let mut mse = 0.0f64;
    for (&a, &b) in reference.iter().zip(test) {
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::non_finite("PSNR inputs must be finite"));
        }
        let d = a - b;
        mse += d * d;
    }
    mse /= reference.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// Nearest-neighbor upsampling by an integer factor: each source pixel
/// becomes a `factor` x `factor` block.
pub fn replicate(image: &[f64], width: usize, height: usize, factor: usize) -> Vec<f64> {
    assert_eq!(image.len(), width * height);
    assert!(factor >= 1);
    let (ow, oh) = (width * factor, height * factor);
    let mut out = vec![0.0; ow * oh];
    for r in 0..oh {
        let src_row = &image[(r / factor) * width..(r / factor + 1) * width];
        let dst_row = &mut out[r * ow..(r + 1) * ow];
        for (c, v) in dst_row.iter_mut().enumerate() {
            *v = src_row[c / factor];
        }
    }
    out
}

/// PSNR per channel slot for one compared plane.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PlanePsnr {
    /// Index of the plane within the target stack.
    pub plane: usize,
    pub depth: f64,
    /// One value per compared channel, in slot order; infinities
    /// serialize as null.
    pub channels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MetricReport {
    pub planes: Vec<PlanePsnr>,
    /// Smallest PSNR over every (plane, channel) entry.
    pub min_psnr: f64,
    /// Mean over every (plane, channel) entry.
    pub mean_psnr: f64,
}

/// Compares reconstructed amplitudes (`amplitudes[plane][slot]` on the
/// `supersample`-times-finer grid) against the square-root amplitudes
/// of the stack planes selected by `plane_indices`, where slot `s`
/// reads stack channel `channels[s]`.
pub fn compare_to_stack(
    stack: &FocalStack,
    plane_indices: &[usize],
    channels: &[usize],
    amplitudes: &[Vec<Vec<f64>>],
    supersample: usize,
) -> Result<MetricReport> {
    if plane_indices.is_empty() || channels.is_empty() {
        return Err(Error::invalid("at least one plane and channel are required"));
    }
    if amplitudes.len() != plane_indices.len() {
        return Err(Error::mismatch("one amplitude set per compared plane is required"));
    }
    for &k in plane_indices {
        if k >= stack.plane_depths().len() {
            return Err(Error::invalid(format!("plane index {k} out of range")));
        }
    }
    if channels.iter().any(|&c| c >= 3) {
        return Err(Error::invalid("stack channels must come from 0..3"));
    }
    let (w, h) = (stack.width(), stack.height());
    let big = w * supersample * h * supersample;

    // Per-channel target amplitudes and their global peaks.
    let mut targets: Vec<Vec<Vec<f64>>> = Vec::with_capacity(channels.len());
    let mut peaks = vec![0.0f64; channels.len()];
    for (s, &c) in channels.iter().enumerate() {
        let mut per_plane = Vec::with_capacity(plane_indices.len());
        for &k in plane_indices {
            let amp: Vec<f64> =
                stack.channel_image(k, c).iter().map(|&v| v.max(0.0).sqrt()).collect();
            peaks[s] = amp.iter().fold(peaks[s], |m, &v| m.max(v));
            per_plane.push(amp);
        }
        if peaks[s] <= 0.0 {
            return Err(Error::invalid(format!(
                "stack channel {c} is empty on the compared planes"
            )));
        }
        targets.push(per_plane);
    }

    let mut planes = Vec::with_capacity(plane_indices.len());
    let mut min_psnr = f64::INFINITY;
    let mut sum = 0.0f64;
    let mut count = 0usize;
    for (pi, &k) in plane_indices.iter().enumerate() {
        let mut row = Vec::with_capacity(channels.len());
        for s in 0..channels.len() {
            let recon = &amplitudes[pi][s];
            if recon.len() != big {
                return Err(Error::mismatch(
                    "reconstructed plane size must match the supersampled grid",
                ));
            }
            let up = replicate(&targets[s][pi], w, h, supersample);
            let value = psnr(&up, recon, peaks[s])?;
            min_psnr = min_psnr.min(value);
            sum += value;
            count += 1;
            row.push(value);
        }
        planes.push(PlanePsnr { plane: k, depth: stack.plane_depths()[k], channels: row });
    }
    Ok(MetricReport { planes, min_psnr, mean_psnr: sum / count as f64 })
}
