//! Step-size exploration on the desk-scale regression scene: renders
//! the same 256 x 256 two-layer stack the acceptance suite uses, runs
//! short optimizations at several Adam step sizes, prints the loss
//! trajectories, and finishes each run with a per-pupil residual
//! breakdown so convergence floors can be traced to eye-box positions.

use std::sync::Arc;
use std::time::Instant;

use holo_core::incoherent::MaskSpec;
use holo_core::ldi::{LayeredDepthImage, LdiLayer};
use holo_core::loss::{
    EvalConfig, Evaluator, HologramBatch, Precision, PupilFilter, ScaleSet,
    SupervisedTargets,
};
use holo_core::optimize::{optimize, OptimizerConfig};
use holo_core::pupils::{pupil_normalization, sample_pupils, EyeBox, PupilSetConfig};
use holo_core::reconstruct::KernelCache;
use holo_core::render::{render_focal_stack, RenderParams};

fn desk_scene() -> LayeredDepthImage {
    let n = 256usize;
    let mut back_color = Vec::with_capacity(n * n);
    for y in 0..n {
        for x in 0..n {
            let (xf, yf) = (x as f64 / n as f64, y as f64 / n as f64);
            let checker = ((x / 16 + y / 16) % 2) as f64;
            back_color.push([0.25 + 0.45 * xf, 0.30 + 0.55 * checker, 0.20 + 0.40 * yf]);
        }
    }
    let back = LdiLayer::dense(back_color, vec![1.0e-3; n * n]);
    let mut front_color = vec![[0.0; 3]; n * n];
    let mut front_depth = vec![f64::NAN; n * n];
    let mut front_valid = vec![false; n * n];
    for y in 80..176 {
        for x in 64..192 {
            if (112..144).contains(&x) && (112..144).contains(&y) {
                continue;
            }
            let i = y * n + x;
            let fine = ((x / 8 + y / 8) % 2) as f64;
            front_color[i] =
                [0.80 - 0.30 * (y as f64 / n as f64), 0.20 + 0.70 * fine, 0.35];
            front_depth[i] = -0.8e-3;
            front_valid[i] = true;
        }
    }
    let front = LdiLayer::new(front_color, front_depth, front_valid);
    LayeredDepthImage::new(n, n, vec![front, back]).unwrap()
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let iterations: usize = args.get(1).map_or(60, |s| s.parse().unwrap());
    let steps: Vec<f64> = if args.len() > 2 {
        args[2..].iter().map(|s| s.parse().unwrap()).collect()
    } else {
        vec![0.02, 0.05, 0.1, 0.2]
    };

    let params = RenderParams {
        plane_depths: (0..6).map(|k| -1.2e-3 + 2.4e-3 * k as f64 / 5.0).collect(),
        wavelengths: [632e-9, 520e-9, 450e-9],
        pitch: 8e-6,
        mask: MaskSpec::default_circular(),
        depth_tolerance: 0.1e-3,
    };
    let t0 = Instant::now();
    let stack = render_focal_stack(&desk_scene(), &params).unwrap();
    eprintln!("rendered in {:.1} s", t0.elapsed().as_secs_f64());

    for &step in &steps {
        for prefit in [false] {
            let config = OptimizerConfig {
                frames: 3,
                iterations,
                step_size: step,
                seed: 7,
                channels: vec![1],
                prefit,
                pupils: PupilSetConfig {
                    total: 9,
                    fixed: 4,
                    random: 5,
                    base_radius: 2e-3,
                    eye_box: EyeBox::new(-4e-3, -4e-3, 4e-3, 4e-3).unwrap(),
                },
                eval: EvalConfig { precision: Precision::F32, ..EvalConfig::default() },
                ..OptimizerConfig::default()
            };
            let t = Instant::now();
            let result =
                optimize(&stack, &config, None, Arc::new(KernelCache::new())).unwrap();
            let first = result.history.first().unwrap().loss;
            let best = result.history.last().unwrap().best_loss;
            let sigma = result.batch.channels()[0].global_scale;
            print!(
                "step {step:>5} prefit {}: first {first:.4e} best {best:.4e} ({:.1}%) sigma {sigma:.4}",
                if prefit { "on " } else { "off" },
                100.0 * best / first
            );
            print!("  trajectory:");
            for row in result.history.iter().step_by(10.max(iterations / 12)) {
                print!(" {:.3e}", row.loss);
            }
            println!("  [{:.0} s]", t.elapsed().as_secs_f64());

            breakdown(&result.batch, &stack, &config);
        }
    }
}

/// Re-evaluates the converged batch against the pupil draw the optimizer
/// used on its first iteration and prints the residual grouped by pupil
/// and by focal plane.
fn breakdown(
    batch: &HologramBatch,
    stack: &holo_core::render::FocalStack,
    config: &OptimizerConfig,
) {
    // Mirrors the optimizer's internal pupil stream: seed xor "pupils".
    let specs =
        sample_pupils(&config.pupils, 0, config.seed ^ 0x70_75_70_69_6c_73).unwrap();
    let pupil_scales: Vec<f64> = specs
        .iter()
        .map(|p| {
            pupil_normalization(p, config.pupils.base_radius, config.pupil_normalization)
        })
        .collect();
    let filters: Vec<PupilFilter> =
        specs.iter().map(|p| PupilFilter::Disk(p.clone())).collect();

    let npx = stack.width() * stack.height();
    let planes: Vec<usize> = (0..stack.plane_depths().len()).collect();
    let targets =
        SupervisedTargets::from_stack(stack, &planes, &config.channels).unwrap();
    let scales = ScaleSet::new(vec![1.0; npx], pupil_scales).unwrap();
    let evaluator = Evaluator::with_cache(
        EvalConfig { precision: Precision::F64, ..config.eval.clone() },
        Arc::new(KernelCache::new()),
    )
    .unwrap();
    let eval =
        evaluator.evaluate(batch, &filters, &targets, &scales, false).unwrap();

    let mut by_pupil = vec![0.0f64; specs.len()];
    let mut by_plane = vec![0.0f64; planes.len()];
    for pair in &eval.per_pair {
        by_pupil[pair.pupil] += pair.value;
        by_plane[pair.plane] += pair.value;
    }
    let total: f64 = by_pupil.iter().sum();
    println!("  residual by pupil (loss {:.4e}):", eval.loss);
    for (k, spec) in specs.iter().enumerate() {
        let d = (spec.center[0].powi(2) + spec.center[1].powi(2)).sqrt();
        println!(
            "    pupil {k}: center ({:+.2}, {:+.2}) mm  r {:.2} mm  |c| {:.2} mm  {:?}  share {:5.1}%",
            spec.center[0] * 1e3,
            spec.center[1] * 1e3,
            spec.radius * 1e3,
            d * 1e3,
            spec.kind,
            100.0 * by_pupil[k] / total
        );
    }
    print!("  residual by plane:");
    for (k, depth) in stack.plane_depths().iter().enumerate() {
        print!(" [{:+.2} mm: {:4.1}%]", depth * 1e3, 100.0 * by_plane[k] / total);
    }
    println!();
}
