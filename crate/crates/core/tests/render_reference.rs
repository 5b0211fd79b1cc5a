//! Reference check for the focal-stack renderer: a deliberately naive
//! re-splat — no kernel memoization, no occlusion quick-rejects, one
//! visibility trace per covered pixel — must reproduce the optimized
//! renderer bit for bit.

use holo_core::incoherent::{default_max_angle, incoherent_kernel, KernelGrid, MaskSpec};
use holo_core::ldi::{LayeredDepthImage, LdiLayer};
use holo_core::render::{render_focal_stack, RenderParams};
use holo_core::visibility::{trace_visibility, SourceSample};
use rand::{Rng, SeedableRng};

/// Same PSF grid rule the renderer uses: the blur disk plus margin so
/// the periodized tails stay negligible.
fn naive_kernel_grid(radius_px: f64, pitch: f64) -> KernelGrid {
    let r = radius_px.ceil() as usize;
    let margin = (r / 2).max(4);
    let n = 2 * (r + margin) + 1;
    KernelGrid { width: n, height: n, pitch }
}

/// Splats every sample onto every plane with a freshly built kernel and
/// a visibility trace for every single covered pixel.
fn naive_focal_stack(ldi: &LayeredDepthImage, params: &RenderParams) -> Vec<Vec<[f64; 3]>> {
    let (w, h) = (ldi.width(), ldi.height());
    let mut planes = Vec::new();
    for &plane_depth in &params.plane_depths {
        let mut image = vec![[0.0f64; 3]; w * h];
        for p in ldi.points() {
            for c in 0..3 {
                let angle = match params.mask {
                    MaskSpec::None => 0.0,
                    MaskSpec::Circular { max_angle } => max_angle
                        .unwrap_or_else(|| default_max_angle(params.wavelengths[c], params.pitch)),
                };
                let radius_px =
                    (p.depth - plane_depth).abs() * angle.tan() / params.pitch;
                let grid = naive_kernel_grid(radius_px, params.pitch);
                let kernel = incoherent_kernel(
                    p.depth,
                    plane_depth,
                    params.wavelengths[c],
                    &grid,
                    &params.mask,
                )
                .unwrap();
                let (kcx, kcy) = (kernel.width / 2, kernel.height / 2);
                for ky in 0..kernel.height {
                    for kx in 0..kernel.width {
                        let value = kernel.values[ky * kernel.width + kx];
                        if value == 0.0 {
                            continue;
                        }
                        let tx = p.x as i64 + kx as i64 - kcx as i64;
                        let ty = p.y as i64 + ky as i64 - kcy as i64;
                        if tx < 0 || tx >= w as i64 || ty < 0 || ty >= h as i64 {
                            continue;
                        }
                        let visible = trace_visibility(
                            ldi,
                            SourceSample { x: p.x, y: p.y, layer: p.layer },
                            (tx as f64 + 0.5, ty as f64 + 0.5),
                            plane_depth,
                            params.depth_tolerance,
                        );
                        if visible {
                            image[ty as usize * w + tx as usize][c] += p.color[c] * value;
                        }
                    }
                }
            }
        }
        planes.push(image);
    }
    planes
}

/// A 20 x 20 two-layer scene with holes, depth variation, and genuine
/// occlusion between the layers.
fn busy_scene(seed: u64) -> LayeredDepthImage {
    let n = 20usize;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut back_color = Vec::with_capacity(n * n);
    let mut back_depth = Vec::with_capacity(n * n);
    for i in 0..n * n {
        let (x, y) = (i % n, i / n);
        back_color.push([
            0.2 + 0.6 * x as f64 / n as f64,
            0.3 + 0.4 * y as f64 / n as f64,
            rng.random_range(0.05..0.9),
        ]);
        back_depth.push(8e-4 + 2e-4 * ((x + y) % 3) as f64);
    }
    let mut front_color = vec![[0.0; 3]; n * n];
    let mut front_depth = vec![f64::NAN; n * n];
    let mut front_valid = vec![false; n * n];
    for y in 6..13 {
        for x in 5..15 {
            let i = y * n + x;
            front_color[i] = [0.9, rng.random_range(0.1..0.8), 0.2];
            front_depth[i] = -7e-4;
            front_valid[i] = true;
        }
    }
    LayeredDepthImage::new(
        n,
        n,
        vec![
            LdiLayer::new(front_color, front_depth, front_valid),
            LdiLayer::dense(back_color, back_depth),
        ],
    )
    .unwrap()
}

#[test]
fn optimized_renderer_matches_the_naive_resplat() {
    let ldi = busy_scene(11);
    let params = RenderParams {
        plane_depths: vec![-7e-4, 2e-4, 9.5e-4],
        wavelengths: [632e-9, 520e-9, 450e-9],
        pitch: 8e-6,
        mask: MaskSpec::default_circular(),
        depth_tolerance: 1e-4,
    };
    let stack = render_focal_stack(&ldi, &params).unwrap();
    let naive = naive_focal_stack(&ldi, &params);

    assert_eq!(stack.plane_count(), naive.len());
    let mut max_diff = 0.0f64;
    for k in 0..naive.len() {
        for (a, b) in stack.plane(k).iter().zip(&naive[k]) {
            for c in 0..3 {
                max_diff = max_diff.max((a[c] - b[c]).abs());
            }
        }
    }
    assert!(
        max_diff <= 1e-12,
        "optimized and naive renders disagree by {max_diff:.3e}"
    );
    // The scene is busy enough that something actually lands.
    assert!(stack.plane_energy(1).iter().sum::<f64>() > 1.0);
}

#[test]
fn a_wall_right_in_front_of_a_point_blanks_it_out() {
    let n = 15usize;
    // Single bright background point behind a solid near wall.
    let mut back_color = vec![[0.0; 3]; n * n];
    let mut back_depth = vec![f64::NAN; n * n];
    let mut back_valid = vec![false; n * n];
    let center = (n / 2) * n + n / 2;
    back_color[center] = [1.0, 1.0, 1.0];
    back_depth[center] = 1e-3;
    back_valid[center] = true;
    let wall_color = vec![[0.2, 0.2, 0.2]; n * n];
    let wall_depth = vec![-1e-3; n * n];
    let ldi = LayeredDepthImage::new(
        n,
        n,
        vec![
            LdiLayer::dense(wall_color, wall_depth),
            LdiLayer::new(back_color, back_depth, back_valid),
        ],
    )
    .unwrap();
    // The ray march samples once per crossed pixel, so the tolerance
    // must cover at least half the depth advanced per step (the 3 mm
    // span in one step for the shortest rays) for the wall to register.
    let params = RenderParams {
        plane_depths: vec![-2e-3],
        wavelengths: [632e-9, 520e-9, 450e-9],
        pitch: 8e-6,
        mask: MaskSpec::default_circular(),
        depth_tolerance: 0.6e-3,
    };
    let stack = render_focal_stack(&ldi, &params).unwrap();

    // Every ray from the background point toward the plane crosses the
    // wall, so the point leaves no trace; the wall itself still shows.
    let wall_only = LayeredDepthImage::new(
        n,
        n,
        vec![LdiLayer::dense(vec![[0.2, 0.2, 0.2]; n * n], vec![-1e-3; n * n])],
    )
    .unwrap();
    let wall_stack = render_focal_stack(&wall_only, &params).unwrap();
    for (a, b) in stack.plane(0).iter().zip(wall_stack.plane(0)) {
        for c in 0..3 {
            assert_eq!(a[c], b[c], "occluded point must contribute exactly zero");
        }
    }
}
