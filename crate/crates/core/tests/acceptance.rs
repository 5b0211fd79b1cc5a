//! The release gate: ten numbered criteria covering oracle equivalence,
//! gradient fidelity, renderer physics, display geometry, and the
//! desk-scale optimization regression with its locked quality score.
//! Each `cNN_*` test prints one pass/fail line through the harness.
//!
//! The heavy fixtures (the 256 x 256 two-layer scene, its rendered
//! stack, and the 300-iteration reference optimization) are built once
//! and shared; criteria 7-10 read them instead of re-running.

use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use holo_core::incoherent::{circular_mask, default_max_angle, incoherent_kernel, KernelGrid, MaskSpec};
use holo_core::ldi::{LayeredDepthImage, LdiLayer};
use holo_core::loss::{
    EvalConfig, Evaluator, HologramBatch, Precision, PupilFilter, ScaleSet,
};
use holo_core::metrics::compare_to_stack;
use holo_core::optimize::{optimize, OptimizeResult, OptimizerConfig};
use holo_core::oracle::{run_canonical_gradient_check, run_propagation_check};
use holo_core::propagation::{propagate, Padding};
use holo_core::pupils::{EyeBox, PupilSetConfig};
use holo_core::reconstruct::{KernelCache, PupilKind, PupilSpec};
use holo_core::render::{render_focal_stack, FocalStack, RenderParams};
use holo_core::simulate::{eyebox_sweep, simulate_reconstruction};
use holo_core::field::ComplexField;
use holo_core::Optics;
use rand::{Rng, SeedableRng};

// ---------------------------------------------------------------------
// Shared fixtures
// ---------------------------------------------------------------------

const DESK_SEED: u64 = 7;
const DESK_CHANNEL: usize = 1;
const PUPIL_RADIUS: f64 = 2e-3;

/// Mean reconstruction PSNR of the reference optimization through the
/// center pupil, frozen on the first green run of criterion 7. Runs on
/// the same seed must stay within 0.1 dB.
const DESK_MEAN_PSNR_LOCK_DB: f64 = f64::NAN;

/// 256 x 256 two-layer desk scene: a textured wall behind a floating
/// textured panel with a square cutout, depths inside +/- 1 mm so the
/// defocus disks stay around ten pixels.
fn desk_scene() -> LayeredDepthImage {
    let n = 256usize;
    let mut back_color = Vec::with_capacity(n * n);
    for y in 0..n {
        for x in 0..n {
            let (xf, yf) = (x as f64 / n as f64, y as f64 / n as f64);
            let checker = ((x / 16 + y / 16) % 2) as f64;
            back_color.push([
                0.25 + 0.45 * xf,
                0.30 + 0.55 * checker,
                0.20 + 0.40 * yf,
            ]);
        }
    }
    let back = LdiLayer::dense(back_color, vec![1.0e-3; n * n]);

    let mut front_color = vec![[0.0; 3]; n * n];
    let mut front_depth = vec![f64::NAN; n * n];
    let mut front_valid = vec![false; n * n];
    for y in 80..176 {
        for x in 64..192 {
            if (112..144).contains(&x) && (112..144).contains(&y) {
                continue; // the cutout
            }
            let i = y * n + x;
            let fine = ((x / 8 + y / 8) % 2) as f64;
            front_color[i] = [0.80 - 0.30 * (y as f64 / n as f64), 0.20 + 0.70 * fine, 0.35];
            front_depth[i] = -0.8e-3;
            front_valid[i] = true;
        }
    }
    let front = LdiLayer::new(front_color, front_depth, front_valid);
    LayeredDepthImage::new(n, n, vec![front, back]).unwrap()
}

fn desk_plane_depths() -> Vec<f64> {
    (0..6).map(|k| -1.2e-3 + 2.4e-3 * k as f64 / 5.0).collect()
}

fn desk_stack() -> &'static FocalStack {
    static STACK: OnceLock<FocalStack> = OnceLock::new();
    STACK.get_or_init(|| {
        let params = RenderParams {
            plane_depths: desk_plane_depths(),
            wavelengths: [632e-9, 520e-9, 450e-9],
            pitch: 8e-6,
            mask: MaskSpec::default_circular(),
            depth_tolerance: 0.1e-3,
        };
        let start = Instant::now();
        let stack = render_focal_stack(&desk_scene(), &params).unwrap();
        eprintln!("[fixture] rendered desk stack in {:.1} s", start.elapsed().as_secs_f64());
        stack
    })
}

/// Criterion 7's optimizer settings: T = 3, orders = 3, 9 pupils
/// (4 fixed + 5 random), 6 supervised planes, green channel, 32-bit
/// engine arithmetic for single-core speed. The plain descent loop
/// starts the global scale at one and must carry it to its fitted value
/// (~14 for this scene) inside the budget, so the step is 0.1 rather
/// than the 0.02 default.
fn desk_config(frames: usize, iterations: usize, center_only: bool) -> OptimizerConfig {
    let mut config = OptimizerConfig {
        frames,
        iterations,
        step_size: 0.1,
        prefit: false,
        seed: DESK_SEED,
        channels: vec![DESK_CHANNEL],
        pupils: PupilSetConfig {
            total: 9,
            fixed: 4,
            random: 5,
            base_radius: PUPIL_RADIUS,
            eye_box: EyeBox::new(-4e-3, -4e-3, 4e-3, 4e-3).unwrap(),
        },
        eval: EvalConfig { precision: Precision::F32, ..EvalConfig::default() },
        ..OptimizerConfig::default()
    };
    config.ablation.center_pupil_only = center_only;
    config
}

struct DeskRun {
    result: OptimizeResult,
    wall: Duration,
    cache: Arc<KernelCache>,
    mean_psnr: f64,
}

/// Mean PSNR of `batch` against the desk stack, reconstructed through
/// the centered 2 mm pupil at every plane depth.
fn center_pupil_psnr(batch: &HologramBatch, cache: &Arc<KernelCache>) -> f64 {
    let stack = desk_stack();
    let evaluator = Evaluator::with_cache(
        EvalConfig { precision: Precision::F32, ..EvalConfig::default() },
        Arc::clone(cache),
    )
    .unwrap();
    let pupil = PupilFilter::Disk(
        PupilSpec::new(0.0, 0.0, PUPIL_RADIUS, PupilKind::Fixed).unwrap(),
    );
    let scales = ScaleSet::for_pupils(
        vec![1.0; batch.width() * batch.height()],
        std::slice::from_ref(&pupil),
        PUPIL_RADIUS,
        true,
    )
    .unwrap();
    let recon =
        simulate_reconstruction(&evaluator, batch, &pupil, stack.plane_depths(), &scales)
            .unwrap();
    let indices: Vec<usize> = (0..stack.plane_count()).collect();
    let report = compare_to_stack(
        stack,
        &indices,
        &[DESK_CHANNEL],
        recon.amplitudes(),
        recon.supersample(),
    )
    .unwrap();
    report.mean_psnr
}

/// The 300-iteration reference optimization, run once.
fn desk_run() -> &'static DeskRun {
    static RUN: OnceLock<DeskRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let stack = desk_stack();
        let config = desk_config(3, 300, false);
        let cache = Arc::new(KernelCache::new());
        let start = Instant::now();
        let result = optimize(stack, &config, None, Arc::clone(&cache)).unwrap();
        let wall = start.elapsed();
        let mean_psnr = center_pupil_psnr(&result.batch, &cache);
        eprintln!(
            "[fixture] reference optimization: {:.1} s, first loss {:.4e}, best {:.4e}, \
             mean PSNR {:.4} dB",
            wall.as_secs_f64(),
            result.history.first().unwrap().loss,
            result.history.last().unwrap().best_loss,
            mean_psnr
        );
        DeskRun { result, wall, cache, mean_psnr }
    })
}

// ---------------------------------------------------------------------
// Criteria 1-6: oracles, renderer physics, display geometry
// ---------------------------------------------------------------------

#[test]
fn c01_propagation_matches_direct_summation() {
    let start = Instant::now();
    let report = run_propagation_check(20, 42).unwrap();
    let elapsed = start.elapsed();
    assert!(
        report.max_abs_error < 1e-10,
        "max |fast - direct| = {:.3e} over {} fields",
        report.max_abs_error,
        report.cases
    );
    assert!(elapsed < Duration::from_secs(5), "oracle sweep took {elapsed:?}");
}

#[test]
fn c02_gradients_match_finite_differences() {
    let start = Instant::now();
    let report = run_canonical_gradient_check(5, 42).unwrap();
    let elapsed = start.elapsed();
    for case in &report.cases {
        assert!(
            case.max_rel_error < 1e-4,
            "{}: max relative error {:.3e} over {} probes",
            case.name,
            case.max_rel_error,
            case.probes
        );
    }
    assert_eq!(report.cases.len(), 5);
    assert!(elapsed < Duration::from_secs(60), "gradient check took {elapsed:?}");
}

#[test]
fn c03_renderer_conserves_energy() {
    // Ten isolated samples, one layer, defocus disks well inside the
    // image: each plane must hold exactly the summed point intensity.
    let n = 48usize;
    let positions = [
        (14, 14),
        (30, 13),
        (22, 20),
        (15, 29),
        (33, 31),
        (24, 34),
        (13, 22),
        (34, 22),
        (20, 27),
        (28, 27),
    ];
    let mut color = vec![[0.0; 3]; n * n];
    let mut depth = vec![f64::NAN; n * n];
    let mut valid = vec![false; n * n];
    let mut expected = [0.0f64; 3];
    for (j, &(x, y)) in positions.iter().enumerate() {
        let i = y * n + x;
        let c = [
            0.2 + 0.07 * j as f64,
            0.9 - 0.06 * j as f64,
            0.3 + 0.05 * j as f64,
        ];
        color[i] = c;
        depth[i] = -0.8e-3 + 1.6e-3 * j as f64 / 9.0;
        valid[i] = true;
        for ch in 0..3 {
            expected[ch] += c[ch];
        }
    }
    let ldi =
        LayeredDepthImage::new(n, n, vec![LdiLayer::new(color, depth, valid)]).unwrap();
    let params = RenderParams {
        plane_depths: vec![-1e-3, 0.0, 1e-3],
        wavelengths: [632e-9, 520e-9, 450e-9],
        pitch: 8e-6,
        mask: MaskSpec::default_circular(),
        depth_tolerance: 1e-5,
    };
    let stack = render_focal_stack(&ldi, &params).unwrap();
    for k in 0..stack.plane_count() {
        let energy = stack.plane_energy(k);
        for c in 0..3 {
            let rel = (energy[c] - expected[c]).abs() / expected[c];
            assert!(
                rel < 1e-6,
                "plane {k} channel {c}: energy {:.9} vs sum {:.9} (rel {rel:.2e})",
                energy[c],
                expected[c]
            );
        }
    }
}

#[test]
fn c04_defocus_kernel_is_masked_coherent_psf() {
    // The intensity PSF must equal the squared magnitude of a coherently
    // propagated impulse, masked to the light cone and renormalized —
    // rebuilt here through the field-level propagation entry point.
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(404);
    let n = 41usize;
    let grid = KernelGrid { width: n, height: n, pitch: 8e-6 };
    for case in 0..20 {
        let wavelength = [632e-9, 520e-9, 450e-9][case % 3];
        let point = rng.random_range(-3e-3..3e-3);
        let offset: f64 = rng.random_range(0.3e-3..2.8e-3);
        let plane = if case % 2 == 0 { point - offset } else { point + offset };
        let kernel =
            incoherent_kernel(point, plane, wavelength, &grid, &MaskSpec::default_circular())
                .unwrap();

        let mut impulse = vec![num_complex::Complex64::new(0.0, 0.0); n * n];
        impulse[(n / 2) * n + n / 2] = num_complex::Complex64::new(1.0, 0.0);
        let field = ComplexField::new(n, n, 8e-6, wavelength, impulse).unwrap();
        let psf = propagate(&field, point - plane, Padding::None).unwrap();
        let mask = circular_mask(&grid, point - plane, default_max_angle(wavelength, 8e-6));
        let mut reference: Vec<f64> = psf
            .data()
            .iter()
            .zip(&mask)
            .map(|(v, &keep)| if keep { v.norm_sqr() } else { 0.0 })
            .collect();
        let total: f64 = reference.iter().sum();
        for v in &mut reference {
            *v /= total;
        }

        let peak = reference.iter().cloned().fold(0.0, f64::max);
        let mut max_rel = 0.0f64;
        for (a, b) in kernel.values.iter().zip(&reference) {
            max_rel = max_rel.max((a - b).abs() / peak);
        }
        assert!(
            max_rel < 1e-9,
            "case {case} (lambda {:.0} nm, dz {:+.2} mm): max rel {max_rel:.2e}",
            wavelength * 1e9,
            (point - plane) * 1e3
        );
    }
}

#[test]
fn c05_occlusion_shadows_are_exact() {
    // Back wall at +2 mm, half-plane occluder (columns < 28) at
    // +0.5 mm, focal plane at -1 mm. The renderer treats a blocker as a
    // surface with thickness `depth_tolerance` to either side (its
    // depth-quantization band), so a wall ray escapes only if it clears
    // the band face nearer the focal plane, at depth z_f - tol. The lit
    // boundary then follows similar triangles through that face: a ray
    // from source x_s to target x_t crosses it at
    // x_t + (1 - f) * (x_s - x_t) with f = (z_b - (z_f - tol))/(z_b - z_p),
    // and a target is lit once some source within the blur radius R has
    // its crossing right of the occluder edge:
    //   x_t >= edge - (1 - f) * R.
    let n = 48usize;
    let edge = 28usize;
    let (z_b, z_f, z_p) = (2e-3, 0.5e-3, -1e-3);
    let tol = 0.8e-3;
    let f = (z_b - (z_f - tol)) / (z_b - z_p);

    let wall_color = vec![[0.8, 0.9, 1.0]; n * n];
    let wall = LdiLayer::dense(wall_color, vec![z_b; n * n]);
    let mut occ_color = vec![[0.0; 3]; n * n];
    let mut occ_depth = vec![f64::NAN; n * n];
    let mut occ_valid = vec![false; n * n];
    for y in 0..n {
        for x in 0..edge {
            let i = y * n + x;
            occ_color[i] = [0.3, 0.2, 0.1];
            occ_depth[i] = z_f;
            occ_valid[i] = true;
        }
    }
    let occluder = LdiLayer::new(occ_color.clone(), occ_depth.clone(), occ_valid.clone());

    let params = RenderParams {
        plane_depths: vec![z_p],
        wavelengths: [632e-9, 520e-9, 450e-9],
        pitch: 8e-6,
        mask: MaskSpec::default_circular(),
        depth_tolerance: tol,
    };
    let both = render_focal_stack(
        &LayeredDepthImage::new(n, n, vec![occluder, wall]).unwrap(),
        &params,
    )
    .unwrap();
    let occ_only = render_focal_stack(
        &LayeredDepthImage::new(
            n,
            n,
            vec![LdiLayer::new(occ_color, occ_depth, occ_valid)],
        )
        .unwrap(),
        &params,
    )
    .unwrap();

    let row = n / 2;
    for c in 0..3 {
        let radius = incoherent_kernel(
            z_b,
            z_p,
            params.wavelengths[c],
            &KernelGrid { width: 41, height: 41, pitch: params.pitch },
            &params.mask,
        )
        .unwrap()
        .support_radius;
        let predicted = edge as f64 - (1.0 - f) * radius - 0.5;

        // Every sample left of the predicted boundary receives exactly
        // zero wall light on every row: removing the wall layer must not
        // change those values at all.
        let umbra_end = (predicted - 1.0).floor() as usize;
        for y in 0..n {
            for x in 0..umbra_end {
                let i = y * n + x;
                assert_eq!(
                    both.plane(0)[i][c],
                    occ_only.plane(0)[i][c],
                    "shadowed sample ({x}, {y}) channel {c} received wall light"
                );
            }
        }

        // The measured boundary sits within one sample of the
        // similar-triangles prediction built from the actual PSF radius.
        let contribution: Vec<f64> = (0..n)
            .map(|x| both.plane(0)[row * n + x][c] - occ_only.plane(0)[row * n + x][c])
            .collect();
        let first_lit = contribution
            .iter()
            .position(|&v| v != 0.0)
            .expect("the unoccluded side must receive wall light");
        assert!(
            (first_lit as f64 - predicted).abs() <= 1.0,
            "channel {c}: first lit column {first_lit} vs predicted {predicted:.2}"
        );
    }
}

#[test]
fn c06_eye_box_extent_matches_display_geometry() {
    let optics = Optics::default_display();
    let extent = optics.order_extent(632e-9);
    assert!(
        (extent - 6.32e-3).abs() < 1e-12,
        "lambda f / p = {:.5e} m, expected 6.32 mm",
        extent
    );
    // Consistent with the quoted ~6.4 mm square eye box within 2%.
    assert!((extent - 6.4e-3).abs() / 6.4e-3 < 0.02);
}

// ---------------------------------------------------------------------
// Criteria 7-10: desk-scale regression and its properties
// ---------------------------------------------------------------------

#[test]
fn c07_desk_scale_optimization_regression() {
    let run = desk_run();
    let first = run.result.history.first().unwrap().loss;
    let best = run.result.history.last().unwrap().best_loss;
    assert!(!run.result.diverged, "reference optimization diverged");
    assert!(
        best < 0.25 * first,
        "loss fell only to {best:.4e} from {first:.4e} ({:.1}%)",
        100.0 * best / first
    );
    assert!(
        run.wall < Duration::from_secs(15 * 60),
        "optimization took {:?}",
        run.wall
    );
    if DESK_MEAN_PSNR_LOCK_DB.is_nan() {
        panic!(
            "record the quality lock: measured mean PSNR {:.6} dB",
            run.mean_psnr
        );
    }
    assert!(
        (run.mean_psnr - DESK_MEAN_PSNR_LOCK_DB).abs() < 0.1,
        "mean PSNR {:.4} dB drifted from the locked {:.4} dB",
        run.mean_psnr,
        DESK_MEAN_PSNR_LOCK_DB
    );
}

#[test]
fn c08_more_frames_reach_lower_loss() {
    // Five frames must beat one frame at the same per-frame iteration
    // budget: averaging more independent speckle patterns can only help.
    let stack = desk_stack();
    let iterations = 60;
    let mut bests = Vec::new();
    for frames in [5, 1] {
        let mut config = desk_config(frames, iterations, false);
        // Both arms get the closed-form scale warm start so the short
        // budget measures speckle averaging, not scale fitting.
        config.prefit = true;
        config.step_size = 0.02;
        let cache = Arc::new(KernelCache::new());
        let result = optimize(stack, &config, None, cache).unwrap();
        assert!(!result.diverged);
        bests.push(result.history.last().unwrap().best_loss);
    }
    let (five, one) = (bests[0], bests[1]);
    assert!(
        five <= one,
        "loss with five frames ({five:.4e}) exceeds one frame ({one:.4e})"
    );
}

#[test]
fn c09_multi_pupil_holds_quality_across_eye_box() {
    // Optimizing against the 9-pupil set must not lose to center-only
    // optimization at the worst position of a 3 x 3 pupil lattice.
    let stack = desk_stack();
    let iterations = 60;
    let mut minima = Vec::new();
    for center_only in [false, true] {
        let mut config = desk_config(3, iterations, center_only);
        // Same warm start on both arms (see the frames comparison).
        config.prefit = true;
        config.step_size = 0.02;
        let cache = Arc::new(KernelCache::new());
        let result = optimize(stack, &config, None, Arc::clone(&cache)).unwrap();
        assert!(!result.diverged);
        let evaluator = Evaluator::with_cache(
            EvalConfig { precision: Precision::F32, ..EvalConfig::default() },
            cache,
        )
        .unwrap();
        let indices: Vec<usize> = (0..stack.plane_count()).collect();
        let sweep = eyebox_sweep(
            &evaluator,
            &result.batch,
            stack,
            &indices,
            &[DESK_CHANNEL],
            3,
            PUPIL_RADIUS,
            &EyeBox::new(-4e-3, -4e-3, 4e-3, 4e-3).unwrap(),
            &vec![1.0; stack.width() * stack.height()],
        )
        .unwrap();
        minima.push(sweep.min_mean_psnr);
    }
    let (multi, center) = (minima[0], minima[1]);
    eprintln!("[c09] worst lattice PSNR: multi-pupil {multi:.3} dB, center-only {center:.3} dB");
    assert!(
        multi >= center,
        "multi-pupil worst-case {multi:.3} dB fell below center-only {center:.3} dB"
    );
}

#[test]
fn c10_phase_quantization_costs_under_half_db() {
    let run = desk_run();
    let dir = tempfile::tempdir().unwrap();
    holo_core::io::batch::save_batch(&run.result.batch, dir.path(), None).unwrap();
    let (loaded, _) = holo_core::io::batch::load_batch(dir.path()).unwrap();
    let quantized_psnr = center_pupil_psnr(&loaded, &run.cache);
    let delta = (quantized_psnr - run.mean_psnr).abs();
    eprintln!(
        "[c10] mean PSNR {:.4} dB raw vs {:.4} dB after 8-bit export ({delta:+.4} dB)",
        run.mean_psnr, quantized_psnr
    );
    assert!(
        delta < 0.5,
        "8-bit phase export moved mean PSNR by {delta:.3} dB"
    );
}
