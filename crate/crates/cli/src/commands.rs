//! Implementations of the `holo` subcommands. Each function loads its
//! inputs, drives the core pipeline, writes all outputs plus a
//! `config.json` echo of the resolved settings, and prints a one-line
//! machine-readable summary to stdout.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use holo_core::io::batch::{load_batch, save_batch};
use holo_core::io::cache::{load_cache, save_cache};
use holo_core::io::history::save_history;
use holo_core::io::laser::load_laser_profile;
use holo_core::io::ldi::load_ldi;
use holo_core::io::stack::{load_stack, save_stack};
use holo_core::io::tone::{tone_map, tone_map_rgb};
use holo_core::loss::{Evaluator, HologramBatch, PupilFilter, ScaleSet};
use holo_core::metrics::compare_to_stack;
use holo_core::optimize::optimize;
use holo_core::oracle::{run_gradient_check, run_propagation_check};
use holo_core::reconstruct::KernelCache;
use holo_core::render::{render_focal_stack, FocalStack};
use holo_core::simulate::{eyebox_sweep, focal_sweep, simulate_reconstruction, ReconstructedStack};
use holo_core::{Error, Result};
use serde_json::json;

use crate::config::RunConfig;

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Renders the focal stack of an on-disk scene.
pub fn render(config: &RunConfig, ldi_dir: &Path, out_dir: &Path) -> Result<()> {
    let ldi = load_ldi(ldi_dir)?;
    let params = config.render_params(&ldi)?;
    log::info!(
        "rendering {} planes of a {}x{} scene with {} layers",
        params.plane_depths.len(),
        ldi.width(),
        ldi.height(),
        ldi.layer_count()
    );
    let start = Instant::now();
    let stack = render_focal_stack(&ldi, &params)?;
    let elapsed = start.elapsed();
    save_stack(&stack, out_dir)?;
    write_json(
        &out_dir.join("config.json"),
        &json!({
            "command": "render",
            "ldi": ldi_dir,
            "pitch": params.pitch,
            "wavelengths": params.wavelengths,
            "plane_depths": params.plane_depths,
            "depth_tolerance": params.depth_tolerance,
        }),
    )?;
    println!(
        "rendered planes={} size={}x{} wall_s={:.2}",
        stack.plane_count(),
        stack.width(),
        stack.height(),
        elapsed.as_secs_f64()
    );
    Ok(())
}

fn load_cache_sidecar(cache: &KernelCache, path: Option<&Path>) -> Result<()> {
    if let Some(path) = path {
        if path.exists() {
            let loaded = load_cache(cache, path)?;
            log::info!("loaded {loaded} kernel tables from {}", path.display());
        }
    }
    Ok(())
}

fn save_cache_sidecar(cache: &KernelCache, path: Option<&Path>) -> Result<()> {
    if let Some(path) = path {
        save_cache(cache, path)?;
        log::info!("saved {} kernel tables to {}", cache.len(), path.display());
    }
    Ok(())
}

/// Optimizes a hologram batch against a rendered stack and saves the
/// batch, the loss history, and the resolved configuration.
pub fn optimize_cmd(
    config: &RunConfig,
    stack_dir: &Path,
    out_dir: &Path,
    laser_path: Option<&Path>,
    cache_path: Option<&Path>,
) -> Result<()> {
    let stack = load_stack(stack_dir)?;
    let optimizer = config.optimizer_config()?;
    let laser = laser_path
        .map(|path| load_laser_profile(path, stack.width(), stack.height()))
        .transpose()?;
    let cache = Arc::new(KernelCache::new());
    load_cache_sidecar(&cache, cache_path)?;

    log::info!(
        "optimizing {} channel(s) x {} frame(s) on a {}x{} stack for {} iterations",
        optimizer.channels.len(),
        optimizer.frames,
        stack.width(),
        stack.height(),
        optimizer.iterations
    );
    let start = Instant::now();
    let result = optimize(&stack, &optimizer, laser, Arc::clone(&cache))?;
    let elapsed = start.elapsed();

    let first_loss = result.history.first().map(|row| row.loss);
    let final_loss = result.history.last().map(|row| row.loss);
    let best_loss = result.history.last().map(|row| row.best_loss);
    let metadata = json!({
        "command": "optimize",
        "stack": stack_dir,
        "optimizer": optimizer,
        "laser": laser_path,
        "first_loss": first_loss,
        "final_loss": final_loss,
        "best_loss": best_loss,
        "diverged": result.diverged,
        "wall_s": elapsed.as_secs_f64(),
    });
    save_batch(&result.batch, out_dir, Some(metadata.clone()))?;
    save_history(&result.history, &out_dir.join("history.csv"))?;
    write_json(&out_dir.join("config.json"), &metadata)?;
    save_cache_sidecar(&cache, cache_path)?;

    println!(
        "optimized iterations={} first_loss={} best_loss={} wall_s={:.2}",
        optimizer.iterations,
        first_loss.map_or("n/a".into(), |l| format!("{l:.6e}")),
        best_loss.map_or("n/a".into(), |l| format!("{l:.6e}")),
        elapsed.as_secs_f64()
    );
    if result.diverged {
        return Err(Error::numerical(
            "optimization diverged; the best parameters so far were saved",
        ));
    }
    Ok(())
}

/// Stack channel index for each batch channel, matched by wavelength.
fn match_channels(batch: &HologramBatch, stack: &FocalStack) -> Result<Vec<usize>> {
    batch
        .channels()
        .iter()
        .map(|channel| {
            let wavelength = channel.wavelength;
            let (index, nearest) = stack
                .wavelengths()
                .iter()
                .enumerate()
                .min_by(|a, b| {
                    let da = (a.1 - wavelength).abs();
                    let db = (b.1 - wavelength).abs();
                    da.partial_cmp(&db).unwrap()
                })
                .map(|(i, &w)| (i, w))
                .unwrap();
            if (nearest - wavelength).abs() > 0.05 * wavelength {
                return Err(Error::mismatch(format!(
                    "no stack channel matches the {:.0}nm hologram channel",
                    wavelength * 1e9
                )));
            }
            Ok(index)
        })
        .collect()
}

/// Tone-mapped preview of one reconstructed plane. Batches with three
/// channels map to RGB by descending wavelength; anything else becomes
/// one grayscale image per channel.
fn save_recon_previews(
    recon: &ReconstructedStack,
    batch: &HologramBatch,
    dir: &Path,
    prefix: &str,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let (width, height) = (recon.width(), recon.height());
    let mut slots: Vec<usize> = (0..batch.channels().len()).collect();
    // Descending wavelength puts red first, matching RGB slot order.
    slots.sort_by(|&a, &b| {
        batch.channels()[b]
            .wavelength
            .partial_cmp(&batch.channels()[a].wavelength)
            .unwrap()
    });
    let mut files = Vec::new();
    for (k, planes) in recon.amplitudes().iter().enumerate() {
        if slots.len() == 3 {
            let pixels: Vec<[f64; 3]> = (0..width * height)
                .map(|p| {
                    [
                        planes[slots[0]][p].powi(2),
                        planes[slots[1]][p].powi(2),
                        planes[slots[2]][p].powi(2),
                    ]
                })
                .collect();
            let rgb = tone_map_rgb(&pixels)?;
            let flat: Vec<u8> = rgb.iter().flatten().copied().collect();
            let path = dir.join(format!("{prefix}_{k:03}.png"));
            image::save_buffer(
                &path,
                &flat,
                width as u32,
                height as u32,
                image::ColorType::Rgb8,
            )?;
            files.push(path);
        } else {
            for (slot, amplitudes) in planes.iter().enumerate() {
                let intensity: Vec<f64> = amplitudes.iter().map(|a| a * a).collect();
                let gray = tone_map(&intensity)?;
                let path = dir.join(format!("{prefix}_{k:03}_c{slot}.png"));
                image::save_buffer(
                    &path,
                    &gray,
                    width as u32,
                    height as u32,
                    image::ColorType::L8,
                )?;
                files.push(path);
            }
        }
    }
    Ok(files)
}

/// Scores a batch against a rendered stack through one viewing pupil.
#[allow(clippy::too_many_arguments)]
pub fn eval(
    config: &RunConfig,
    batch_dir: &Path,
    stack_dir: &Path,
    report_path: &Path,
    recon_dir: Option<&Path>,
    plane_indices: &[usize],
    laser_path: Option<&Path>,
    cache_path: Option<&Path>,
) -> Result<()> {
    let (batch, _) = load_batch(batch_dir)?;
    let stack = load_stack(stack_dir)?;
    let pupil = config.eval_pupil()?;
    let channels = match_channels(&batch, &stack)?;
    let plane_indices: Vec<usize> = if plane_indices.is_empty() {
        (0..stack.plane_count()).collect()
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

    let cache = Arc::new(KernelCache::new());
    load_cache_sidecar(&cache, cache_path)?;
    let evaluator = Evaluator::with_cache(config.eval_config(), Arc::clone(&cache))?;
    let laser = laser_path
        .map(|path| load_laser_profile(path, batch.width(), batch.height()))
        .transpose()?
        .unwrap_or_else(|| vec![1.0; batch.width() * batch.height()]);
    let scales = ScaleSet::for_pupils(
        laser,
        std::slice::from_ref(&pupil),
        config.optimize.pupils.base_radius.0,
        config.optimize.pupil_normalization,
    )?;

    let recon = simulate_reconstruction(&evaluator, &batch, &pupil, &depths, &scales)?;
    let report = compare_to_stack(
        &stack,
        &plane_indices,
        &channels,
        recon.amplitudes(),
        recon.supersample(),
    )?;
    if let Some(dir) = recon_dir {
        save_recon_previews(&recon, &batch, dir, "plane")?;
    }
    write_json(
        report_path,
        &json!({
            "command": "eval",
            "batch": batch_dir,
            "stack": stack_dir,
            "pupil": pupil_json(&pupil),
            "plane_indices": plane_indices,
            "report": report,
        }),
    )?;
    save_cache_sidecar(&cache, cache_path)?;
    println!("evaluated mean_psnr={:.3} min_psnr={:.3}", report.mean_psnr, report.min_psnr);
    Ok(())
}

fn pupil_json(pupil: &PupilFilter) -> serde_json::Value {
    match pupil {
        PupilFilter::Open => json!({"kind": "open"}),
        PupilFilter::Disk(spec) => json!({
            "kind": "disk",
            "center": spec.center,
            "radius": spec.radius,
        }),
    }
}

/// Reconstructs the batch at evenly spaced focus depths and writes one
/// preview per depth plus an index of depths and files.
#[allow(clippy::too_many_arguments)]
pub fn sweep_focus(
    config: &RunConfig,
    batch_dir: &Path,
    out_dir: &Path,
    near: f64,
    far: f64,
    count: usize,
    laser_path: Option<&Path>,
    cache_path: Option<&Path>,
) -> Result<()> {
    let (batch, _) = load_batch(batch_dir)?;
    let pupil = config.eval_pupil()?;
    let cache = Arc::new(KernelCache::new());
    load_cache_sidecar(&cache, cache_path)?;
    let evaluator = Evaluator::with_cache(config.eval_config(), Arc::clone(&cache))?;
    let laser = laser_path
        .map(|path| load_laser_profile(path, batch.width(), batch.height()))
        .transpose()?
        .unwrap_or_else(|| vec![1.0; batch.width() * batch.height()]);
    let scales = ScaleSet::for_pupils(
        laser,
        std::slice::from_ref(&pupil),
        config.optimize.pupils.base_radius.0,
        config.optimize.pupil_normalization,
    )?;

    let recon = focal_sweep(&evaluator, &batch, &pupil, near, far, count, &scales)?;
    let files = save_recon_previews(&recon, &batch, out_dir, "focus")?;
    write_json(
        &out_dir.join("index.json"),
        &json!({
            "command": "sweep focus",
            "batch": batch_dir,
            "pupil": pupil_json(&pupil),
            "depths": recon.plane_depths(),
            "files": files
                .iter()
                .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
                .collect::<Vec<_>>(),
        }),
    )?;
    save_cache_sidecar(&cache, cache_path)?;
    println!("swept depths={} out={}", recon.plane_depths().len(), out_dir.display());
    Ok(())
}

/// Scores the batch across a lattice of pupil positions in the eye box.
#[allow(clippy::too_many_arguments)]
pub fn sweep_eyebox(
    config: &RunConfig,
    batch_dir: &Path,
    stack_dir: &Path,
    report_path: &Path,
    side: usize,
    radius: Option<f64>,
    plane_indices: &[usize],
    laser_path: Option<&Path>,
    cache_path: Option<&Path>,
) -> Result<()> {
    let (batch, _) = load_batch(batch_dir)?;
    let stack = load_stack(stack_dir)?;
    let channels = match_channels(&batch, &stack)?;
    let radius = radius.unwrap_or(config.optimize.pupils.base_radius.0);
    let eye_box = config.optimizer_config()?.pupils.eye_box;

    let cache = Arc::new(KernelCache::new());
    load_cache_sidecar(&cache, cache_path)?;
    let evaluator = Evaluator::with_cache(config.eval_config(), Arc::clone(&cache))?;
    let laser = laser_path
        .map(|path| load_laser_profile(path, batch.width(), batch.height()))
        .transpose()?
        .unwrap_or_else(|| vec![1.0; batch.width() * batch.height()]);

    let sweep = eyebox_sweep(
        &evaluator,
        &batch,
        &stack,
        plane_indices,
        &channels,
        side,
        radius,
        &eye_box,
        &laser,
    )?;
    write_json(
        report_path,
        &json!({
            "command": "sweep eyebox",
            "batch": batch_dir,
            "stack": stack_dir,
            "side": side,
            "radius": radius,
            "eye_box": eye_box,
            "sweep": sweep,
        }),
    )?;
    save_cache_sidecar(&cache, cache_path)?;
    println!(
        "swept positions={} min_mean_psnr={:.3} min_psnr={:.3}",
        side * side,
        sweep.min_mean_psnr,
        sweep.min_psnr
    );
    Ok(())
}

/// Runs the built-in numerical self-checks: the propagation operator
/// against a direct summation, and the analytic gradients against
/// finite differences.
pub fn oracle_check(cases: usize, seed: u64) -> Result<()> {
    let start = Instant::now();
    let propagation = run_propagation_check(cases, seed)?;
    println!(
        "propagation: cases={} max_abs_error={:.3e} tolerance={:.0e} -> {}",
        propagation.cases,
        propagation.max_abs_error,
        propagation.tolerance,
        if propagation.passed() { "pass" } else { "FAIL" }
    );
    let gradients = run_gradient_check(seed)?;
    for case in &gradients.cases {
        println!(
            "gradient {:<28} probes={:<3} max_rel_error={:.3e}",
            case.name, case.probes, case.max_rel_error
        );
    }
    println!(
        "gradients: max_rel_error={:.3e} tolerance={:.0e} -> {}",
        gradients.max_rel_error(),
        gradients.tolerance,
        if gradients.passed() { "pass" } else { "FAIL" }
    );
    println!("oracle-check wall_s={:.2}", start.elapsed().as_secs_f64());
    if !(propagation.passed() && gradients.passed()) {
        return Err(Error::numerical("a numerical self-check failed"));
    }
    Ok(())
}
