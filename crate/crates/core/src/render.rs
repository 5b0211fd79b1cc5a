//! Incoherent focal-stack rendering with occlusion-aware splatting.
//!
//! Every valid LDI sample spreads its intensity over every focal plane
//! through its defocus PSF, with per-target visibility resolved by ray
//! marching. Planes are independent work items; within a plane, samples
//! are accumulated in a fixed order so results do not depend on thread
//! count.

use crate::error::{Error, Result};
use crate::exec;
use crate::incoherent::{incoherent_kernel, IncoherentKernel, KernelGrid, MaskSpec};
use crate::ldi::{LayeredDepthImage, PointSample};
use crate::visibility::{trace_visibility, SourceSample};
use std::collections::HashMap;
use std::sync::Arc;

/// A stack of intensity images at increasing focal-plane depths.
#[derive(Debug, Clone, PartialEq)]
pub struct FocalStack {
    width: usize,
    height: usize,
    pitch: f64,
    wavelengths: [f64; 3],
    plane_depths: Vec<f64>,
    planes: Vec<Vec<[f64; 3]>>,
}

impl FocalStack {
    pub fn new(
        width: usize,
        height: usize,
        pitch: f64,
        wavelengths: [f64; 3],
        plane_depths: Vec<f64>,
        planes: Vec<Vec<[f64; 3]>>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("focal stack dimensions must be nonzero"));
        }
        if plane_depths.is_empty() {
            return Err(Error::invalid("focal stack needs at least one plane"));
        }
        if planes.len() != plane_depths.len() {
            return Err(Error::invalid("plane count does not match depth count"));
        }
        if !plane_depths.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("plane depths must be strictly increasing"));
        }
        if !plane_depths.iter().all(|d| d.is_finite()) {
            return Err(Error::non_finite("plane depths must be finite"));
        }
        for plane in &planes {
            if plane.len() != width * height {
                return Err(Error::invalid("plane image does not match stack dimensions"));
            }
        }
        Ok(FocalStack { width, height, pitch, wavelengths, plane_depths, planes })
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

    pub fn wavelengths(&self) -> [f64; 3] {
        self.wavelengths
    }

    pub fn plane_depths(&self) -> &[f64] {
        &self.plane_depths
    }

    pub fn plane_count(&self) -> usize {
        self.plane_depths.len()
    }

    pub fn plane(&self, k: usize) -> &[[f64; 3]] {
        &self.planes[k]
    }

    /// One channel of one plane as a flat image.
    pub fn channel_image(&self, k: usize, channel: usize) -> Vec<f64> {
        self.planes[k].iter().map(|px| px[channel]).collect()
    }

    /// Total intensity of one plane per channel.
    pub fn plane_energy(&self, k: usize) -> [f64; 3] {
        let mut sum = [0.0; 3];
        for px in &self.planes[k] {
            for c in 0..3 {
                sum[c] += px[c];
            }
        }
        sum
    }
}

/// Settings for [`render_focal_stack`].
#[derive(Debug, Clone)]
pub struct RenderParams {
    /// Focal-plane depths in meters, strictly increasing.
    pub plane_depths: Vec<f64>,
    pub wavelengths: [f64; 3],
    /// Pixel pitch of the scene and of the output planes.
    pub pitch: f64,
    /// PSF cutoff; the circular default keeps blur disks at the
    /// diffraction-limited cone of the sampling.
    pub mask: MaskSpec,
    /// Depth tolerance for visibility rays; see
    /// [`crate::visibility::default_depth_tolerance`].
    pub depth_tolerance: f64,
}

impl RenderParams {
    pub fn validate(&self) -> Result<()> {
        if self.plane_depths.is_empty() {
            return Err(Error::invalid("at least one focal plane is required"));
        }
        if !self.plane_depths.iter().all(|d| d.is_finite()) {
            return Err(Error::non_finite("plane depths must be finite"));
        }
        if !self.plane_depths.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("plane depths must be strictly increasing"));
        }
        if !(self.pitch.is_finite() && self.pitch > 0.0) {
            return Err(Error::invalid("pitch must be positive"));
        }
        if self.wavelengths.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::invalid("wavelengths must be positive"));
        }
        if !(self.depth_tolerance.is_finite() && self.depth_tolerance > 0.0) {
            return Err(Error::invalid("depth tolerance must be positive"));
        }
        Ok(())
    }
}

/// Spatial occupancy and depth summaries used to skip visibility rays
/// that cannot possibly be blocked.
struct SceneIndex {
    width: usize,
    height: usize,
    /// Integral image of "pixel has any valid sample", (width+1) columns.
    occupancy: Vec<u32>,
    /// All valid sample depths, sorted.
    depths: Vec<f64>,
}

impl SceneIndex {
    fn new(ldi: &LayeredDepthImage) -> Self {
        let (w, h) = (ldi.width(), ldi.height());
        let mut occupied = vec![false; w * h];
        let mut depths = Vec::new();
        for p in ldi.points() {
            occupied[p.y * w + p.x] = true;
            depths.push(p.depth);
        }
        depths.sort_by(f64::total_cmp);
        let mut occupancy = vec![0u32; (w + 1) * (h + 1)];
        for y in 0..h {
            for x in 0..w {
                occupancy[(y + 1) * (w + 1) + (x + 1)] = occupied[y * w + x] as u32
                    + occupancy[y * (w + 1) + (x + 1)]
                    + occupancy[(y + 1) * (w + 1) + x]
                    - occupancy[y * (w + 1) + x];
            }
        }
        SceneIndex { width: w, height: h, occupancy, depths }
    }

    /// Number of occupied pixels in the clipped box around `(x, y)`.
    fn occupied_around(&self, x: usize, y: usize, radius: usize) -> u32 {
        let x0 = x.saturating_sub(radius);
        let y0 = y.saturating_sub(radius);
        let x1 = (x + radius + 1).min(self.width);
        let y1 = (y + radius + 1).min(self.height);
        let w1 = self.width + 1;
        self.occupancy[y1 * w1 + x1] + self.occupancy[y0 * w1 + x0]
            - self.occupancy[y0 * w1 + x1]
            - self.occupancy[y1 * w1 + x0]
    }

    /// Whether any sample depth lies strictly between `a` and `b` while
    /// sitting more than `eps` away from `source_depth`.
    fn any_blocker_depth(&self, a: f64, b: f64, source_depth: f64, eps: f64) -> bool {
        let (lo, hi) = (a.min(b), a.max(b));
        let start = self.depths.partition_point(|&d| d <= lo);
        let end = self.depths.partition_point(|&d| d < hi);
        if start >= end {
            return false;
        }
        // The in-range depths are sorted; only values outside the
        // tolerance band around the source can block.
        self.depths[start] < source_depth - eps || self.depths[end - 1] > source_depth + eps
    }
}

/// Chooses the PSF grid for a blur radius: enough margin that the
/// periodized tails wrapped around the edges stay negligible.
fn kernel_grid(radius_px: f64, pitch: f64) -> KernelGrid {
    let r = radius_px.ceil() as usize;
    let margin = (r / 2).max(4);
    let n = 2 * (r + margin) + 1;
    KernelGrid { width: n, height: n, pitch }
}

struct PlaneScratch {
    /// Visibility memo per target offset, reused across channels.
    memo: Vec<u8>,
}

const MEMO_UNKNOWN: u8 = 0;
const MEMO_VISIBLE: u8 = 1;
const MEMO_BLOCKED: u8 = 2;

fn splat_plane(
    ldi: &LayeredDepthImage,
    points: &[PointSample],
    index: &SceneIndex,
    params: &RenderParams,
    plane_depth: f64,
    kernels: &mut HashMap<(u64, usize), Arc<IncoherentKernel>>,
    scratch: &mut PlaneScratch,
) -> Result<Vec<[f64; 3]>> {
    let (w, h) = (ldi.width(), ldi.height());
    let mut image = vec![[0.0f64; 3]; w * h];
    let eps = params.depth_tolerance;

    for p in points {
        // Per-channel PSFs for this point depth, memoized per plane task.
        let mut channel_kernels: [Option<Arc<IncoherentKernel>>; 3] = [None, None, None];
        let mut r_box = 0usize;
        for c in 0..3 {
            let key = (p.depth.to_bits(), c);
            let kernel = match kernels.get(&key) {
                Some(k) => k.clone(),
                None => {
                    let radius_px = blur_radius_px(p.depth, plane_depth, params, c);
                    let grid = kernel_grid(radius_px, params.pitch);
                    let k = Arc::new(incoherent_kernel(
                        p.depth,
                        plane_depth,
                        params.wavelengths[c],
                        &grid,
                        &params.mask,
                    )?);
                    kernels.insert(key, k.clone());
                    k
                }
            };
            r_box = r_box.max(kernel.support_radius.ceil() as usize);
            channel_kernels[c] = Some(kernel);
        }

        // Occlusion quick rejects: no depth in between, or nothing else
        // occupies the neighborhood the rays can cross.
        let mut need_trace =
            index.any_blocker_depth(p.depth, plane_depth, p.depth, eps);
        if need_trace && index.occupied_around(p.x, p.y, r_box) == 1 {
            need_trace = own_pixel_can_block(ldi, p, plane_depth, eps);
        }

        let memo_side = 2 * r_box + 1;
        if need_trace {
            scratch.memo.clear();
            scratch.memo.resize(memo_side * memo_side, MEMO_UNKNOWN);
        }

        for c in 0..3 {
            let kernel = channel_kernels[c].as_ref().unwrap();
            let (kw, kh) = (kernel.width, kernel.height);
            let (kcx, kcy) = (kw / 2, kh / 2);
            for ky in 0..kh {
                let ty = p.y as i64 + ky as i64 - kcy as i64;
                if ty < 0 || ty >= h as i64 {
                    continue;
                }
                for kx in 0..kw {
                    let value = kernel.values[ky * kw + kx];
                    if value == 0.0 {
                        continue;
                    }
                    let tx = p.x as i64 + kx as i64 - kcx as i64;
                    if tx < 0 || tx >= w as i64 {
                        continue;
                    }
                    if need_trace {
                        let (ox, oy) = (kx as i64 - kcx as i64, ky as i64 - kcy as i64);
                        let mi = (oy + r_box as i64) as usize * memo_side
                            + (ox + r_box as i64) as usize;
                        let mut state = scratch.memo[mi];
                        if state == MEMO_UNKNOWN {
                            let visible = trace_visibility(
                                ldi,
                                SourceSample { x: p.x, y: p.y, layer: p.layer },
                                (tx as f64 + 0.5, ty as f64 + 0.5),
                                plane_depth,
                                eps,
                            );
                            state = if visible { MEMO_VISIBLE } else { MEMO_BLOCKED };
                            scratch.memo[mi] = state;
                        }
                        if state == MEMO_BLOCKED {
                            continue;
                        }
                    }
                    image[ty as usize * w + tx as usize][c] += p.color[c] * value;
                }
            }
        }
    }
    Ok(image)
}

/// Whether another sample in the source pixel's own column could block
/// rays from `p` toward the plane (conservative: ignores ray geometry).
fn own_pixel_can_block(
    ldi: &LayeredDepthImage,
    p: &PointSample,
    plane_depth: f64,
    eps: f64,
) -> bool {
    let (lo, hi) = (p.depth.min(plane_depth), p.depth.max(plane_depth));
    for layer in 0..ldi.layer_count() {
        if layer == p.layer || !ldi.is_valid(p.x, p.y, layer) {
            continue;
        }
        let z = ldi.depth(p.x, p.y, layer);
        if z > lo && z < hi && (z - p.depth).abs() > eps {
            return true;
        }
    }
    false
}

fn blur_radius_px(
    point_depth: f64,
    plane_depth: f64,
    params: &RenderParams,
    channel: usize,
) -> f64 {
    match params.mask {
        MaskSpec::None => 0.0,
        MaskSpec::Circular { max_angle } => {
            let angle = max_angle.unwrap_or_else(|| {
                crate::incoherent::default_max_angle(params.wavelengths[channel], params.pitch)
            });
            (point_depth - plane_depth).abs() * angle.tan() / params.pitch
        }
    }
}

/// Renders the incoherent focal stack of `ldi` on the planes in
/// `params`, one intensity image per plane, conserving each sample's
/// total energy up to image-boundary clipping and occlusion.
pub fn render_focal_stack(
    ldi: &LayeredDepthImage,
    params: &RenderParams,
) -> Result<FocalStack> {
    params.validate()?;
    let points = ldi.points();
    let index = SceneIndex::new(ldi);

    type KernelMap = HashMap<(u64, usize), Arc<IncoherentKernel>>;
    let tasks: Vec<usize> = (0..params.plane_depths.len()).collect();
    let results: Vec<Result<Vec<[f64; 3]>>> = exec::map_with_scratch(
        tasks,
        || (KernelMap::new(), PlaneScratch { memo: Vec::new() }),
        |state, k| {
            let (kernels, scratch) = state;
            splat_plane(
                ldi,
                &points,
                &index,
                params,
                params.plane_depths[k],
                kernels,
                scratch,
            )
        },
    );
    let mut planes = Vec::with_capacity(results.len());
    for r in results {
        planes.push(r?);
    }
    FocalStack::new(
        ldi.width(),
        ldi.height(),
        params.pitch,
        params.wavelengths,
        params.plane_depths.clone(),
        planes,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldi::LdiLayer;
    use crate::visibility::default_depth_tolerance;

    fn params(depths: Vec<f64>) -> RenderParams {
        RenderParams {
            plane_depths: depths,
            wavelengths: [632e-9, 520e-9, 450e-9],
            pitch: 8e-6,
            mask: MaskSpec::default_circular(),
            depth_tolerance: default_depth_tolerance(6e-3, 6),
        }
    }

    /// A few isolated bright points well inside a dark frame.
    fn sparse_scene(w: usize, h: usize) -> LayeredDepthImage {
        let n = w * h;
        let mut color = vec![[0.0; 3]; n];
        let mut depth = vec![0.0; n];
        let mut valid = vec![false; n];
        let spots = [
            (w / 2, h / 2, 1.5e-3, [1.0, 0.5, 0.25]),
            (w / 3, h / 3, 3.0e-3, [0.2, 0.8, 0.4]),
            (2 * w / 3, 2 * h / 3, 4.5e-3, [0.6, 0.1, 0.9]),
        ];
        for &(x, y, z, c) in &spots {
            valid[y * w + x] = true;
            depth[y * w + x] = z;
            color[y * w + x] = c;
        }
        LayeredDepthImage::new(w, h, vec![LdiLayer::new(color, depth, valid)]).unwrap()
    }

    #[test]
    fn stack_has_one_image_per_plane() {
        let ldi = sparse_scene(64, 64);
        let stack = render_focal_stack(&ldi, &params(vec![0.0, 2e-3, 4e-3])).unwrap();
        assert_eq!(stack.plane_count(), 3);
        assert_eq!(stack.plane(0).len(), 64 * 64);
    }

    #[test]
    fn occlusion_free_scene_conserves_energy_per_plane() {
        let ldi = sparse_scene(96, 96);
        let total = ldi.total_intensity();
        let stack = render_focal_stack(&ldi, &params(vec![0.0, 1e-3, 3e-3, 5e-3])).unwrap();
        for k in 0..stack.plane_count() {
            let energy = stack.plane_energy(k);
            for c in 0..3 {
                let rel = (energy[c] - total[c]).abs() / total[c];
                assert!(rel < 1e-9, "plane {k} channel {c} off by {rel}");
            }
        }
    }

    #[test]
    fn in_focus_plane_recovers_sharp_points() {
        // A single point imaged on its own plane: all of its light stays
        // in its own pixel.
        let n = 32 * 32;
        let mut color = vec![[0.0; 3]; n];
        let mut depth = vec![0.0; n];
        let mut valid = vec![false; n];
        valid[16 * 32 + 16] = true;
        depth[16 * 32 + 16] = 1.5e-3;
        color[16 * 32 + 16] = [1.0, 0.5, 0.25];
        let ldi =
            LayeredDepthImage::new(32, 32, vec![LdiLayer::new(color, depth, valid)]).unwrap();
        let stack = render_focal_stack(&ldi, &params(vec![1.5e-3])).unwrap();
        let px = stack.plane(0)[16 * 32 + 16];
        assert!((px[0] - 1.0).abs() < 1e-12);
        assert!((px[1] - 0.5).abs() < 1e-12);
        assert_eq!(stack.plane(0).iter().map(|p| p[0]).sum::<f64>(), px[0]);
    }

    #[test]
    fn defocused_light_spreads_but_stays_nonnegative() {
        let ldi = sparse_scene(64, 64);
        let stack = render_focal_stack(&ldi, &params(vec![0.0])).unwrap();
        let center = stack.plane(0)[(64 / 2) * 64 + 64 / 2];
        assert!(center[0] < 1.0);
        assert!(stack.plane(0).iter().all(|px| px.iter().all(|&v| v >= 0.0)));
    }

    #[test]
    fn monotonic_depths_are_required() {
        let ldi = sparse_scene(16, 16);
        let mut p = params(vec![2e-3, 1e-3]);
        assert!(render_focal_stack(&ldi, &p).is_err());
        p.plane_depths = vec![1e-3, 1e-3];
        assert!(render_focal_stack(&ldi, &p).is_err());
    }

    #[test]
    fn occluded_wall_throws_a_shadow() {
        // A wall behind a big opaque card: on the front plane, the card
        // region receives less wall light than the open region.
        let (w, h) = (48usize, 48usize);
        let n = w * h;
        let wall = LdiLayer::dense(vec![[1.0; 3]; n], vec![4e-3; n]);
        let mut cvalid = vec![false; n];
        let mut cdepth = vec![0.0; n];
        for y in 12..36 {
            for x in 12..36 {
                cvalid[y * w + x] = true;
                cdepth[y * w + x] = 2e-3;
            }
        }
        let card = LdiLayer::new(vec![[0.05; 3]; n], cdepth, cvalid);
        let ldi = LayeredDepthImage::new(w, h, vec![card, wall]).unwrap();
        let stack = render_focal_stack(&ldi, &params(vec![0.0])).unwrap();
        let behind_card = stack.plane(0)[24 * w + 24][1];
        let open = stack.plane(0)[6 * w + 6][1];
        assert!(
            behind_card < open * 0.5,
            "shadowed {behind_card} vs open {open}"
        );
    }
}
