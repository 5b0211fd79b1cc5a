//! Precision-generic spectral engine behind loss evaluation and eye-view
//! simulation.
//!
//! For every (plane, pupil) pair the forward model tiles each frame's
//! base spectrum over the grating orders, applies the propagation
//! transfer function (with aperture envelope) and the pupil mask, and
//! returns to the spatial domain on the supersampled grid. Because the
//! pupil keeps only a small set of frequency bins, both directions of
//! the 2D transform are pruned to the occupied rows and columns, which
//! is exact: zero lines contribute nothing.
//!
//! Work is split over (plane, pupil) pairs in fixed-size chunks; partial
//! gradients are folded sequentially in pair order, so accumulation
//! order never depends on thread count.

use crate::error::{Error, Result};
use crate::exec;
use crate::fft::{fft2, transpose, FftScalar};
use crate::field::FrequencyGrid;
use crate::loss::{LossNorm, PupilFilter, ScaleMode};
use num_complex::{Complex, Complex64};
use rustfft::num_traits::Zero;
use std::sync::Arc;

/// Pairs processed per parallel chunk between sequential folds.
const FOLD_CHUNK: usize = 8;

/// One horizontal run of in-pupil bins on the supersampled grid.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Segment {
    pub row: usize,
    pub col_start: usize,
    pub len: usize,
}

/// The set of frequency bins a pupil admits.
#[derive(Debug, Clone)]
pub(crate) struct Support {
    /// Bin rows with at least one admitted bin, ascending.
    pub rows: Vec<usize>,
    pub segments: Vec<Segment>,
}

impl Support {
    pub fn bin_count(&self) -> usize {
        self.segments.iter().map(|s| s.len).sum()
    }
}

/// Enumerates the bins of `grid` admitted by `filter`, matching the
/// strict-interior test of [`crate::reconstruct::pupil_mask`] bin for
/// bin.
pub(crate) fn compute_support(
    grid: &FrequencyGrid,
    filter: &PupilFilter,
    wavelength: f64,
    focal_length: f64,
) -> Support {
    let (w, h) = (grid.width(), grid.height());
    match filter {
        PupilFilter::Open => {
            let rows = (0..h).collect();
            let segments =
                (0..h).map(|row| Segment { row, col_start: 0, len: w }).collect();
            Support { rows, segments }
        }
        PupilFilter::Disk(pupil) => {
            let ([cx, cy], radius) = pupil.frequency_circle(wavelength, focal_length);
            let r2 = radius * radius;
            let mut rows = Vec::new();
            let mut segments = Vec::new();
            for row in 0..h {
                let dy = grid.fy(row) - cy;
                let chord2 = r2 - dy * dy;
                if chord2 <= 0.0 {
                    continue;
                }
                // Signed column bins whose center is strictly inside.
                let half = chord2.sqrt();
                let lo = ((cx - half) / grid.step_x()).floor() as i64;
                let hi = ((cx + half) / grid.step_x()).ceil() as i64;
                let min_bin = -((w / 2) as i64);
                let max_bin = (w as i64 - 1) - (w as i64 / 2);
                let mut first: Option<i64> = None;
                let mut last = 0i64;
                for b in lo.max(min_bin)..=hi.min(max_bin) {
                    let dx = b as f64 * grid.step_x() - cx;
                    if dx * dx + dy * dy < r2 {
                        if first.is_none() {
                            first = Some(b);
                        }
                        last = b;
                    }
                }
                let Some(first) = first else { continue };
                rows.push(row);
                // Map the signed run onto natural bin order; a run that
                // straddles zero from below wraps into two pieces.
                let to_index = |b: i64| -> usize {
                    if b >= 0 {
                        b as usize
                    } else {
                        (b + w as i64) as usize
                    }
                };
                if first < 0 && last >= 0 {
                    segments.push(Segment {
                        row,
                        col_start: 0,
                        len: (last + 1) as usize,
                    });
                    segments.push(Segment {
                        row,
                        col_start: to_index(first),
                        len: (-first) as usize,
                    });
                } else {
                    segments.push(Segment {
                        row,
                        col_start: to_index(first),
                        len: (last - first + 1) as usize,
                    });
                }
            }
            Support { rows, segments }
        }
    }
}

/// Everything one evaluation needs for one color channel.
pub(crate) struct ChannelRequest<'a, T> {
    pub wavelength: f64,
    pub global_scale: f64,
    /// Phase frames, base resolution.
    pub frames: Vec<&'a [f64]>,
    /// Target amplitude per supervised plane, base resolution.
    pub targets: Vec<&'a [f64]>,
    /// Transfer function (kernel times envelope) per supervised plane on
    /// the supersampled grid.
    pub transfers: Vec<Arc<Vec<Complex<T>>>>,
}

pub(crate) struct EngineRequest<'a, T> {
    pub width: usize,
    pub height: usize,
    pub pitch: f64,
    pub orders: usize,
    pub focal_length: f64,
    pub channels: Vec<ChannelRequest<'a, T>>,
    pub pupils: &'a [PupilFilter],
    pub pupil_scales: &'a [f64],
    pub laser: &'a [f64],
    pub scale_mode: ScaleMode,
    pub loss_norm: LossNorm,
    pub intensity_floor: f64,
}

/// Loss contribution of one (channel, plane, pupil) triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairLoss {
    pub channel: usize,
    pub plane: usize,
    pub pupil: usize,
    pub value: f64,
}

pub(crate) struct EngineOutput {
    pub loss: f64,
    pub per_pair: Vec<PairLoss>,
    /// Phase gradients `[channel][frame][pixel]`.
    pub phase_grads: Option<Vec<Vec<Vec<f64>>>>,
    /// Global-scale gradients per channel.
    pub scale_grads: Option<Vec<f64>>,
}

/// The unit-amplitude or amplitude-scaled carrier for one frame, f64.
fn carrier(
    phase: &[f64],
    laser: &[f64],
    sigma: f64,
    mode: ScaleMode,
) -> Vec<Complex64> {
    match mode {
        ScaleMode::Amplitude => phase
            .iter()
            .zip(laser)
            .map(|(&p, &l)| {
                let a = sigma * l;
                Complex64::new(a * p.cos(), a * p.sin())
            })
            .collect(),
        ScaleMode::PhaseArgument => phase
            .iter()
            .zip(laser)
            .map(|(&p, &l)| {
                let arg = sigma * l * p;
                Complex64::new(arg.cos(), arg.sin())
            })
            .collect(),
    }
}

struct TaskScratch<T> {
    /// Supersampled spectrum buffer; all-zero between tasks.
    v: Vec<Complex<T>>,
    /// Transpose / backward staging buffer.
    stage: Vec<Complex<T>>,
    /// Spatial fields per frame, transposed layout (column-major of the
    /// natural image).
    p: Vec<Vec<Complex<T>>>,
    /// Mean intensity across frames, then the intensity gradient.
    i_acc: Vec<T>,
    line: Vec<Complex<T>>,
}

impl<T: FftScalar> TaskScratch<T> {
    fn new(npx: usize, frames: usize) -> Self {
        TaskScratch {
            v: vec![Complex::zero(); npx],
            stage: vec![Complex::zero(); npx],
            p: (0..frames).map(|_| vec![Complex::zero(); npx]).collect(),
            i_acc: vec![T::zero(); npx],
            line: Vec::new(),
        }
    }
}

fn ensure_line<T: FftScalar>(line: &mut Vec<Complex<T>>, len: usize) {
    if line.len() < len {
        line.resize(len, Complex::zero());
    }
}

/// Unnormalized inverse 2D transform of `v` (rows x cols `ph` x `pw`,
/// nonzero only on `rows`), written transposed into `out`. Restores `v`
/// to all-zero.
fn partial_ifft2<T: FftScalar>(
    v: &mut [Complex<T>],
    rows: &[usize],
    ph: usize,
    pw: usize,
    out: &mut [Complex<T>],
    line: &mut Vec<Complex<T>>,
) {
    let row_plan = T::plan(pw, true);
    let col_plan = T::plan(ph, true);
    ensure_line(
        line,
        row_plan.get_inplace_scratch_len().max(col_plan.get_inplace_scratch_len()),
    );
    for &r in rows {
        row_plan.process_with_scratch(&mut v[r * pw..(r + 1) * pw], line);
    }
    transpose(v, out, ph, pw);
    for &r in rows {
        v[r * pw..(r + 1) * pw].fill(Complex::zero());
    }
    for c in 0..pw {
        col_plan.process_with_scratch(&mut out[c * ph..(c + 1) * ph], line);
    }
}

/// Forward 2D transform of the transposed spatial buffer `pt` (layout
/// `pw` x `ph`), materializing only the output rows in `out_rows`; the
/// result lands in natural layout inside `stage`, valid on those rows.
/// Destroys `pt`.
fn partial_fft2_t<T: FftScalar>(
    pt: &mut [Complex<T>],
    out_rows: &[usize],
    ph: usize,
    pw: usize,
    stage: &mut [Complex<T>],
    line: &mut Vec<Complex<T>>,
) {
    let m_plan = T::plan(ph, false);
    let n_plan = T::plan(pw, false);
    ensure_line(
        line,
        m_plan.get_inplace_scratch_len().max(n_plan.get_inplace_scratch_len()),
    );
    for n in 0..pw {
        m_plan.process_with_scratch(&mut pt[n * ph..(n + 1) * ph], line);
    }
    transpose(pt, stage, pw, ph);
    for &r in out_rows {
        n_plan.process_with_scratch(&mut stage[r * pw..(r + 1) * pw], line);
    }
}

/// Replicated upsampling of a base-resolution image onto the transposed
/// supersampled grid.
fn upsample_transposed<T: FftScalar>(
    base: &[f64],
    w: usize,
    h: usize,
    mu: usize,
) -> Vec<T> {
    let (pw, ph) = (w * mu, h * mu);
    let mut out = vec![T::zero(); pw * ph];
    for c_out in 0..pw {
        let col = &mut out[c_out * ph..(c_out + 1) * ph];
        let src_col = c_out / mu;
        for (r_out, v) in col.iter_mut().enumerate() {
            *v = T::from(base[(r_out / mu) * w + src_col]).unwrap();
        }
    }
    out
}

struct PairOutput {
    pair: PairLoss,
    /// Folded base-grid spectral gradient per frame.
    grad: Option<Vec<Vec<Complex64>>>,
}

#[allow(clippy::too_many_arguments)]
fn run_pair<T: FftScalar>(
    scratch: &mut TaskScratch<T>,
    spectra: &[Vec<Complex<T>>],
    transfer: &[Complex<T>],
    support: &Support,
    a_up: &[T],
    pupil_scale: f64,
    req: &EngineRequest<'_, T>,
    channel: usize,
    plane: usize,
    pupil: usize,
    want_gradient: bool,
) -> PairOutput {
    let (w, h, mu) = (req.width, req.height, req.orders);
    let (pw, ph) = (w * mu, h * mu);
    let npx = pw * ph;
    let frames = spectra.len();
    let c1 = 1.0 / (frames as f64 * (npx as f64) * (npx as f64));
    let inv_s = 1.0 / pupil_scale;
    let floor = req.intensity_floor;

    // Forward: assemble the masked, filtered spectrum and go spatial.
    for (t, spectrum) in spectra.iter().enumerate() {
        for seg in &support.segments {
            let base_row = (seg.row % h) * w;
            let grow = seg.row * pw;
            let mut bc = seg.col_start % w;
            for j in 0..seg.len {
                let gi = grow + seg.col_start + j;
                scratch.v[gi] = spectrum[base_row + bc] * transfer[gi];
                bc += 1;
                if bc == w {
                    bc = 0;
                }
            }
        }
        let (v, p) = (&mut scratch.v, &mut scratch.p[t]);
        partial_ifft2(v, &support.rows, ph, pw, p, &mut scratch.line);
        if t == 0 {
            for (acc, val) in scratch.i_acc.iter_mut().zip(scratch.p[t].iter()) {
                *acc = val.norm_sqr();
            }
        } else {
            for (acc, val) in scratch.i_acc.iter_mut().zip(scratch.p[t].iter()) {
                *acc = *acc + val.norm_sqr();
            }
        }
    }

    // Residual pass: loss contribution and the intensity gradient.
    let grad_weight = 2.0 / npx as f64;
    let mut pair_value = 0.0f64;
    for i in 0..npx {
        let i_phys = scratch.i_acc[i].to_f64().unwrap() * c1;
        let s = i_phys.max(floor).sqrt();
        let d = s * inv_s - a_up[i].to_f64().unwrap();
        match req.loss_norm {
            LossNorm::L2 => pair_value += d * d,
            LossNorm::L1 => pair_value += d.abs(),
        }
        if want_gradient {
            let dd = match req.loss_norm {
                LossNorm::L2 => grad_weight * d,
                LossNorm::L1 => {
                    if d == 0.0 {
                        0.0
                    } else {
                        d.signum() / npx as f64
                    }
                }
            };
            let ds = if i_phys > floor { 0.5 / s } else { 0.0 };
            scratch.i_acc[i] = T::from(dd * inv_s * ds * c1).unwrap();
        }
    }
    pair_value /= npx as f64;

    let pair = PairLoss { channel, plane, pupil, value: pair_value };
    if !want_gradient {
        return PairOutput { pair, grad: None };
    }

    // Backward: push the intensity gradient through each frame.
    let mut grads = Vec::with_capacity(frames);
    for t in 0..frames {
        {
            let pt = &mut scratch.p[t];
            for (val, &gi) in pt.iter_mut().zip(scratch.i_acc.iter()) {
                *val = val.scale(gi);
            }
        }
        partial_fft2_t(
            &mut scratch.p[t],
            &support.rows,
            ph,
            pw,
            &mut scratch.stage,
            &mut scratch.line,
        );
        let mut gu = vec![Complex64::new(0.0, 0.0); w * h];
        for seg in &support.segments {
            let base_row = (seg.row % h) * w;
            let grow = seg.row * pw;
            let mut bc = seg.col_start % w;
            for j in 0..seg.len {
                let gi = grow + seg.col_start + j;
                let v = transfer[gi].conj() * scratch.stage[gi];
                let dst = &mut gu[base_row + bc];
                dst.re += v.re.to_f64().unwrap();
                dst.im += v.im.to_f64().unwrap();
                bc += 1;
                if bc == w {
                    bc = 0;
                }
            }
        }
        grads.push(gu);
    }
    PairOutput { pair, grad: Some(grads) }
}

pub(crate) fn run<T: FftScalar>(
    req: &EngineRequest<'_, T>,
    want_gradient: bool,
) -> Result<EngineOutput> {
    let (w, h, mu) = (req.width, req.height, req.orders);
    let (pw, ph) = (w * mu, h * mu);
    let npx = pw * ph;
    let grid = FrequencyGrid::supersampled(w, h, req.pitch, mu)?;
    let chan_count = req.channels.len();
    let plane_count = req
        .channels
        .first()
        .map(|c| c.targets.len())
        .ok_or_else(|| Error::invalid("at least one channel is required"))?;
    let pupil_count = req.pupils.len();
    let frames = req.channels[0].frames.len();

    let mut loss_sum = 0.0f64;
    let mut per_pair = Vec::with_capacity(chan_count * plane_count * pupil_count);
    let mut phase_grads: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut scale_grads: Vec<f64> = Vec::new();

    for (ci, chan) in req.channels.iter().enumerate() {
        let supports: Vec<Support> = req
            .pupils
            .iter()
            .map(|f| compute_support(&grid, f, chan.wavelength, req.focal_length))
            .collect();
        log::debug!(
            "channel {ci}: {} pupils admitting {} bins total on the {pw}x{ph} grid",
            supports.len(),
            supports.iter().map(Support::bin_count).sum::<usize>(),
        );

        // Base carriers (kept in f64 for the gradient extraction) and
        // their spectra in engine precision.
        let carriers: Vec<Vec<Complex64>> = chan
            .frames
            .iter()
            .map(|phase| carrier(phase, req.laser, chan.global_scale, req.scale_mode))
            .collect();
        let spectra: Vec<Vec<Complex<T>>> = carriers
            .iter()
            .map(|u| {
                let mut s: Vec<Complex<T>> = u
                    .iter()
                    .map(|v| {
                        Complex::new(T::from(v.re).unwrap(), T::from(v.im).unwrap())
                    })
                    .collect();
                fft2(&mut s, h, w, false);
                s
            })
            .collect();

        let a_ups: Vec<Vec<T>> =
            chan.targets.iter().map(|t| upsample_transposed(t, w, h, mu)).collect();

        // Gradient accumulators over (plane, pupil) pairs, in pair order.
        let mut gu_acc: Vec<Vec<Complex64>> = if want_gradient {
            (0..frames).map(|_| vec![Complex64::new(0.0, 0.0); w * h]).collect()
        } else {
            Vec::new()
        };

        let pairs: Vec<(usize, usize)> = (0..plane_count)
            .flat_map(|k| (0..pupil_count).map(move |q| (k, q)))
            .collect();
        for chunk in pairs.chunks(FOLD_CHUNK) {
            let outs: Vec<PairOutput> = exec::map_with_scratch(
                chunk.to_vec(),
                || TaskScratch::<T>::new(npx, frames),
                |scratch, (k, q)| {
                    run_pair(
                        scratch,
                        &spectra,
                        &chan.transfers[k],
                        &supports[q],
                        &a_ups[k],
                        req.pupil_scales[q],
                        req,
                        ci,
                        k,
                        q,
                        want_gradient,
                    )
                },
            );
            for out in outs {
                loss_sum += out.pair.value;
                per_pair.push(out.pair);
                if let Some(grad) = out.grad {
                    for (acc, g) in gu_acc.iter_mut().zip(grad) {
                        for (a, v) in acc.iter_mut().zip(g) {
                            *a += v;
                        }
                    }
                }
            }
        }

        if want_gradient {
            // Adjoint of the base forward FFT, then the chain rule into
            // phases and the global scale.
            let mut frame_grads = Vec::with_capacity(frames);
            let mut g_sigma = 0.0f64;
            for (t, mut gu) in gu_acc.into_iter().enumerate() {
                fft2(&mut gu, h, w, true);
                let scale = (w * h) as f64;
                let u = &carriers[t];
                let phase = chan.frames[t];
                let mut gp = vec![0.0f64; w * h];
                for i in 0..w * h {
                    let gui = gu[i] * scale;
                    let cross = gui * u[i].conj();
                    match req.scale_mode {
                        ScaleMode::Amplitude => {
                            gp[i] = 2.0 * cross.im;
                            g_sigma += 2.0 * cross.re / chan.global_scale;
                        }
                        ScaleMode::PhaseArgument => {
                            let l = req.laser[i];
                            gp[i] = 2.0 * chan.global_scale * l * cross.im;
                            g_sigma += 2.0 * l * phase[i] * cross.im;
                        }
                    }
                }
                frame_grads.push(gp);
            }
            phase_grads.push(frame_grads);
            scale_grads.push(g_sigma);
        }
    }

    // Mean over channels and (plane, pupil) pairs.
    let norm = (chan_count * plane_count * pupil_count) as f64;
    let loss = loss_sum / norm;
    if want_gradient {
        let inv = 1.0 / norm;
        for chan in phase_grads.iter_mut() {
            for frame in chan.iter_mut() {
                for g in frame.iter_mut() {
                    *g *= inv;
                }
            }
        }
        for g in scale_grads.iter_mut() {
            *g *= inv;
        }
    }
    Ok(EngineOutput {
        loss,
        per_pair,
        phase_grads: want_gradient.then_some(phase_grads),
        scale_grads: want_gradient.then_some(scale_grads),
    })
}

/// Forward-only reconstruction: the normalized eye-view amplitude
/// `sqrt(mean_t |field|^2) / pupil_scale` for every (plane, channel),
/// through the single pupil in the request, in natural row-major layout
/// on the supersampled grid.
pub(crate) fn amplitudes<T: FftScalar>(
    req: &EngineRequest<'_, T>,
) -> Result<Vec<Vec<Vec<f64>>>> {
    if req.pupils.len() != 1 {
        return Err(Error::invalid("amplitude reconstruction expects exactly one pupil"));
    }
    let (w, h, mu) = (req.width, req.height, req.orders);
    let (pw, ph) = (w * mu, h * mu);
    let npx = pw * ph;
    let grid = FrequencyGrid::supersampled(w, h, req.pitch, mu)?;
    let plane_count =
        req.channels.first().map(|c| c.transfers.len()).unwrap_or_default();

    let mut out: Vec<Vec<Vec<f64>>> = (0..plane_count)
        .map(|_| Vec::with_capacity(req.channels.len()))
        .collect();
    for chan in req.channels.iter() {
        let support =
            compute_support(&grid, &req.pupils[0], chan.wavelength, req.focal_length);
        let frames = chan.frames.len();
        let spectra: Vec<Vec<Complex<T>>> = chan
            .frames
            .iter()
            .map(|phase| {
                let u = carrier(phase, req.laser, chan.global_scale, req.scale_mode);
                let mut s: Vec<Complex<T>> = u
                    .iter()
                    .map(|v| {
                        Complex::new(T::from(v.re).unwrap(), T::from(v.im).unwrap())
                    })
                    .collect();
                fft2(&mut s, h, w, false);
                s
            })
            .collect();
        let c1 = 1.0 / (frames as f64 * (npx as f64) * (npx as f64));
        let inv_s = 1.0 / req.pupil_scales[0];

        let planes: Vec<Vec<f64>> = exec::map_with_scratch(
            (0..plane_count).collect(),
            || TaskScratch::<T>::new(npx, frames),
            |scratch, k| {
                let transfer = &chan.transfers[k];
                for (t, spectrum) in spectra.iter().enumerate() {
                    for seg in &support.segments {
                        let base_row = (seg.row % h) * w;
                        let grow = seg.row * pw;
                        let mut bc = seg.col_start % w;
                        for j in 0..seg.len {
                            let gi = grow + seg.col_start + j;
                            scratch.v[gi] = spectrum[base_row + bc] * transfer[gi];
                            bc += 1;
                            if bc == w {
                                bc = 0;
                            }
                        }
                    }
                    let (v, p) = (&mut scratch.v, &mut scratch.p[t]);
                    partial_ifft2(v, &support.rows, ph, pw, p, &mut scratch.line);
                    if t == 0 {
                        for (acc, val) in scratch.i_acc.iter_mut().zip(scratch.p[t].iter()) {
                            *acc = val.norm_sqr();
                        }
                    } else {
                        for (acc, val) in scratch.i_acc.iter_mut().zip(scratch.p[t].iter()) {
                            *acc = *acc + val.norm_sqr();
                        }
                    }
                }
                // Transpose back to natural layout while widening to f64.
                let mut amp = vec![0.0f64; npx];
                for c_out in 0..pw {
                    for r_out in 0..ph {
                        let i_phys =
                            scratch.i_acc[c_out * ph + r_out].to_f64().unwrap() * c1;
                        amp[r_out * pw + c_out] =
                            i_phys.max(req.intensity_floor).sqrt() * inv_s;
                    }
                }
                amp
            },
        );
        for (k, plane) in planes.into_iter().enumerate() {
            out[k].push(plane);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reconstruct::{pupil_mask, PupilKind, PupilSpec};
    use proptest::prelude::*;

    fn support_as_mask(support: &Support, w: usize, h: usize) -> Vec<bool> {
        let mut mask = vec![false; w * h];
        for seg in &support.segments {
            for j in 0..seg.len {
                mask[seg.row * w + seg.col_start + j] = true;
            }
        }
        let from_segments: std::collections::HashSet<_> =
            support.segments.iter().map(|s| s.row).collect();
        assert_eq!(from_segments.len(), support.rows.len());
        mask
    }

    #[test]
    fn open_support_covers_every_bin() {
        let grid = FrequencyGrid::supersampled(8, 6, 8e-6, 3).unwrap();
        let s = compute_support(&grid, &PupilFilter::Open, 520e-9, 80e-3);
        assert_eq!(s.bin_count(), grid.len());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// The pruned enumeration must agree bin-for-bin with the dense
        /// mask, including disks that straddle the wrap-around.
        #[test]
        fn disk_support_matches_dense_mask(
            cx_mm in -4.0f64..4.0,
            cy_mm in -4.0f64..4.0,
            r_mm in 0.2f64..4.0,
            mu in prop::sample::select(vec![1usize, 3]),
            w in 8usize..20,
            h in 8usize..20,
        ) {
            let grid = FrequencyGrid::supersampled(w, h, 8e-6, mu).unwrap();
            let pupil =
                PupilSpec::new(cx_mm * 1e-3, cy_mm * 1e-3, r_mm * 1e-3, PupilKind::Random)
                    .unwrap();
            let filter = PupilFilter::Disk(pupil);
            let support = compute_support(&grid, &filter, 520e-9, 80e-3);
            let dense = pupil_mask(&grid, &pupil, 520e-9, 80e-3);
            let sparse = support_as_mask(&support, grid.width(), grid.height());
            prop_assert_eq!(sparse, dense);
        }
    }
}
