//! Gradient-descent optimization of time-multiplexed hologram batches.
//!
//! Each iteration draws a fresh pupil set, evaluates the loss and its
//! analytic gradients over every (channel, plane, pupil) triple, and
//! applies one Adam step to every phase pixel and every per-channel
//! global scale. The best evaluated state is retained, so a late
//! divergence never destroys earlier progress.
//!
//! Runs are deterministic for a given seed: phase initialization and
//! pupil draws use separated counter-based streams, and gradient
//! accumulation is ordered independently of the thread count.

use crate::adam::AdamState;
use crate::error::{Error, Result};
use crate::field::PhasePattern;
use crate::loss::{
    ChannelBatch, EvalConfig, Evaluator, HologramBatch, PupilFilter, ScaleSet,
    SupervisedTargets,
};
use crate::pupils::{pupil_normalization, sample_pupils, PupilSetConfig};
use crate::reconstruct::{KernelCache, PupilKind, PupilSpec};
use crate::render::FocalStack;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;
use std::sync::Arc;
use std::time::Instant;

/// Seed separation between phase initialization and pupil draws.
const PUPIL_SEED_SALT: u64 = 0x70_75_70_69_6c_73;

/// Lower clamp keeping global scales positive through aggressive steps.
const MIN_GLOBAL_SCALE: f64 = 1e-6;

/// Switches that disable individual parts of the full model, used for
/// comparisons.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct AblationFlags {
    /// Replace the sampled pupil set by one fixed pupil at the eye-box
    /// center.
    pub center_pupil_only: bool,
    /// Optimize a single frame regardless of the configured count.
    pub single_frame: bool,
    /// Keep only the central grating order.
    pub first_order_only: bool,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    /// Time-multiplexed frames per channel.
    pub frames: usize,
    pub iterations: usize,
    pub step_size: f64,
    pub seed: u64,
    /// Target stack channels to optimize; one hologram channel is
    /// produced per entry, at that channel's wavelength.
    pub channels: Vec<usize>,
    /// Indices of supervised planes within the stack; empty means all.
    pub plane_indices: Vec<usize>,
    /// Divide each pupil's amplitude by its radius ratio before the
    /// target comparison.
    pub pupil_normalization: bool,
    /// Fit the per-channel global scales in closed form before the first
    /// iteration instead of starting them at one. Off by default: the
    /// plain loop starts every scale at one and descends it together
    /// with the phases. Turning this on skips the early iterations the
    /// descent would otherwise spend on pure rescaling, which is worth
    /// it when the illumination units put the fitted scales far from
    /// one.
    pub prefit: bool,
    pub pupils: PupilSetConfig,
    pub eval: EvalConfig,
    pub ablation: AblationFlags,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            frames: 3,
            iterations: 500,
            step_size: 0.02,
            seed: 0,
            channels: vec![0, 1, 2],
            plane_indices: Vec::new(),
            pupil_normalization: true,
            prefit: false,
            pupils: PupilSetConfig::default_eye_box(),
            eval: EvalConfig::default(),
            ablation: AblationFlags::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 {
            return Err(Error::invalid("at least one frame is required"));
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::invalid("step size must be positive and finite"));
        }
        if self.channels.is_empty() {
            return Err(Error::invalid("at least one channel is required"));
        }
        if self.channels.iter().any(|&c| c >= 3) {
            return Err(Error::invalid("channel indices must come from 0..3"));
        }
        let mut seen = [false; 3];
        for &c in &self.channels {
            if seen[c] {
                return Err(Error::invalid("channel indices must be distinct"));
            }
            seen[c] = true;
        }
        self.pupils.validate()?;
        self.eval.validate()
    }

    /// The configuration with ablation switches folded in.
    fn resolved(&self) -> (usize, EvalConfig) {
        let frames = if self.ablation.single_frame { 1 } else { self.frames };
        let mut eval = self.eval.clone();
        if self.ablation.first_order_only {
            eval.orders = 1;
        }
        (frames, eval)
    }
}

/// One history entry; the loss belongs to the parameters at the start
/// of the iteration, before that iteration's update.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossRow {
    pub iteration: usize,
    pub loss: f64,
    pub best_loss: f64,
    pub wall_ms: u64,
}

#[derive(Debug)]
pub struct OptimizeResult {
    /// The best evaluated batch.
    pub batch: HologramBatch,
    pub history: Vec<LossRow>,
    /// Set when the loss stopped being finite; `batch` still holds the
    /// best earlier state.
    pub diverged: bool,
}

fn random_phase_frames(
    width: usize,
    height: usize,
    pitch: f64,
    frames: usize,
    channel_slot: usize,
    total_frames: usize,
    seed: u64,
) -> Result<Vec<PhasePattern>> {
    (0..frames)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((channel_slot * total_frames + t) as u64);
            let values =
                (0..width * height).map(|_| rng.random_range(0.0..TAU)).collect();
            PhasePattern::new(width, height, pitch, values)
        })
        .collect()
}

/// Pupil filters and scales for one iteration.
fn iteration_pupils(
    config: &OptimizerConfig,
    iteration: u64,
) -> Result<(Vec<PupilFilter>, Vec<f64>)> {
    let specs: Vec<PupilSpec> = if config.ablation.center_pupil_only {
        let (cx, cy) = config.pupils.eye_box.center();
        vec![PupilSpec::new(cx, cy, config.pupils.base_radius, PupilKind::Fixed)?]
    } else {
        sample_pupils(&config.pupils, iteration, config.seed ^ PUPIL_SEED_SALT)?
    };
    let scales = specs
        .iter()
        .map(|p| {
            pupil_normalization(p, config.pupils.base_radius, config.pupil_normalization)
        })
        .collect();
    Ok((specs.into_iter().map(PupilFilter::Disk).collect(), scales))
}

/// Fits each channel's global scale so the first reconstruction lands
/// near the target magnitude, instead of spending early iterations on
/// pure rescaling.
fn prefit_scales(
    evaluator: &Evaluator,
    batch: &mut HologramBatch,
    targets: &SupervisedTargets,
    config: &OptimizerConfig,
    laser: &[f64],
) -> Result<()> {
    let (cx, cy) = config.pupils.eye_box.center();
    let pupil = PupilFilter::Disk(PupilSpec::new(
        cx,
        cy,
        config.pupils.base_radius,
        PupilKind::Fixed,
    )?);
    let scales = ScaleSet::new(laser.to_vec(), vec![1.0])?;
    let depths = targets.plane_depths().to_vec();
    let amps = evaluator.amplitudes(batch, &pupil, &depths, &scales)?;
    for (c, chan) in batch.channels_mut().iter_mut().enumerate() {
        let mut recon_sum = 0.0f64;
        let mut recon_n = 0usize;
        let mut target_sum = 0.0f64;
        let mut target_n = 0usize;
        for k in 0..depths.len() {
            recon_sum += amps[k][c].iter().sum::<f64>();
            recon_n += amps[k][c].len();
            let t = targets.amplitude(c, k);
            target_sum += t.iter().sum::<f64>();
            target_n += t.len();
        }
        let recon_mean = recon_sum / recon_n.max(1) as f64;
        let target_mean = target_sum / target_n.max(1) as f64;
        if recon_mean > 0.0 && target_mean > 0.0 {
            chan.global_scale =
                (chan.global_scale * target_mean / recon_mean).max(MIN_GLOBAL_SCALE);
        }
    }
    Ok(())
}

/// Optimizes a hologram batch against the rendered stack.
///
/// `laser` is the per-pixel source amplitude (unit mean when
/// calibrated); `None` means uniform. The kernel cache is shared with
/// any later evaluation passes.
pub fn optimize(
    stack: &FocalStack,
    config: &OptimizerConfig,
    laser: Option<Vec<f64>>,
    cache: Arc<KernelCache>,
) -> Result<OptimizeResult> {
    config.validate()?;
    let (frames, eval_config) = config.resolved();
    let (width, height, pitch) = (stack.width(), stack.height(), stack.pitch());
    let laser = laser.unwrap_or_else(|| vec![1.0; width * height]);
    if laser.len() != width * height {
        return Err(Error::mismatch("laser profile size must match the stack"));
    }

    let plane_indices: Vec<usize> = if config.plane_indices.is_empty() {
        (0..stack.plane_depths().len()).collect()
    } else {
        config.plane_indices.clone()
    };
    let targets = SupervisedTargets::from_stack(stack, &plane_indices, &config.channels)?;

    let evaluator = Evaluator::with_cache(eval_config, cache)?;
    let channels = config
        .channels
        .iter()
        .enumerate()
        .map(|(slot, &c)| {
            ChannelBatch::new(
                stack.wavelengths()[c],
                1.0,
                random_phase_frames(
                    width,
                    height,
                    pitch,
                    frames,
                    slot,
                    frames,
                    config.seed,
                )?,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut batch = HologramBatch::new(channels)?;
    if config.prefit {
        prefit_scales(&evaluator, &mut batch, &targets, config, &laser)?;
    }

    let chan_count = batch.channels().len();
    let mut phase_opt: Vec<Vec<AdamState>> = (0..chan_count)
        .map(|_| (0..frames).map(|_| AdamState::new(width * height)).collect())
        .collect();
    let mut scale_opt: Vec<AdamState> =
        (0..chan_count).map(|_| AdamState::new(1)).collect();

    let mut best = batch.clone();
    let mut best_loss = f64::INFINITY;
    let mut history = Vec::with_capacity(config.iterations);
    let started = Instant::now();

    for iteration in 0..config.iterations {
        let (pupils, pupil_scales) = iteration_pupils(config, iteration as u64)?;
        let scales = ScaleSet::new(laser.clone(), pupil_scales)?;
        let out = evaluator.evaluate(&batch, &pupils, &targets, &scales, true)?;

        if !out.loss.is_finite() {
            log::warn!("loss diverged at iteration {iteration}; keeping the best state");
            return Ok(OptimizeResult { batch: best, history, diverged: true });
        }
        if out.loss < best_loss {
            best_loss = out.loss;
            best = batch.clone();
        }
        history.push(LossRow {
            iteration,
            loss: out.loss,
            best_loss,
            wall_ms: started.elapsed().as_millis() as u64,
        });

        let grad = out.gradient.expect("gradient requested");
        for (c, chan) in batch.channels_mut().iter_mut().enumerate() {
            for (t, frame) in chan.frames.iter_mut().enumerate() {
                phase_opt[c][t].update(
                    frame.values_mut(),
                    &grad.phase[c][t],
                    config.step_size,
                );
            }
            let mut sigma = [chan.global_scale];
            scale_opt[c].update(
                &mut sigma,
                &[grad.global_scale[c]],
                config.step_size,
            );
            chan.global_scale = sigma[0].max(MIN_GLOBAL_SCALE);
        }
    }

    // The final update is only kept when it actually evaluates better.
    if config.iterations > 0 {
        let (pupils, pupil_scales) =
            iteration_pupils(config, config.iterations as u64)?;
        let scales = ScaleSet::new(laser, pupil_scales)?;
        let out = evaluator.evaluate(&batch, &pupils, &targets, &scales, false)?;
        if out.loss.is_finite() && out.loss < best_loss {
            best_loss = out.loss;
            best = batch;
        }
        history.push(LossRow {
            iteration: config.iterations,
            loss: out.loss,
            best_loss,
            wall_ms: started.elapsed().as_millis() as u64,
        });
    } else {
        best = batch;
    }

    Ok(OptimizeResult { batch: best, history, diverged: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pupils::EyeBox;

    /// A tiny two-plane stack with a bright square per plane.
    fn tiny_stack(width: usize, height: usize) -> FocalStack {
        let mut planes = vec![vec![[0.0; 3]; width * height]; 2];
        for y in 2..height - 2 {
            for x in 2..width / 2 {
                planes[0][y * width + x] = [0.6, 0.4, 0.2];
            }
            for x in width / 2..width - 2 {
                planes[1][y * width + x] = [0.2, 0.5, 0.7];
            }
        }
        FocalStack::new(width, height, 8e-6, [632e-9, 520e-9, 450e-9], vec![-1e-3, 2e-3], planes)
            .unwrap()
    }

    fn tiny_config(iterations: usize) -> OptimizerConfig {
        OptimizerConfig {
            frames: 2,
            iterations,
            step_size: 0.05,
            seed: 11,
            channels: vec![1],
            plane_indices: Vec::new(),
            pupil_normalization: true,
            prefit: true,
            pupils: PupilSetConfig {
                total: 2,
                fixed: 1,
                random: 1,
                base_radius: 1.5e-3,
                eye_box: EyeBox::new(-3e-3, -3e-3, 3e-3, 3e-3).unwrap(),
            },
            eval: EvalConfig { orders: 1, ..EvalConfig::default() },
            ablation: AblationFlags::default(),
        }
    }

    #[test]
    fn loss_drops_on_a_tiny_scene() {
        let stack = tiny_stack(16, 16);
        let result =
            optimize(&stack, &tiny_config(30), None, Arc::new(KernelCache::new())).unwrap();
        assert!(!result.diverged);
        assert_eq!(result.history.len(), 31);
        let first = result.history[0].loss;
        let best = result.history.last().unwrap().best_loss;
        assert!(
            best < 0.6 * first,
            "expected a clear improvement: first {first}, best {best}"
        );
        // Rows carry the running minimum.
        for w in result.history.windows(2) {
            assert!(w[1].best_loss <= w[0].best_loss + 1e-15);
        }
    }

    #[test]
    fn zero_iterations_returns_the_initialization() {
        let stack = tiny_stack(16, 16);
        let result =
            optimize(&stack, &tiny_config(0), None, Arc::new(KernelCache::new())).unwrap();
        assert!(result.history.is_empty());
        assert!(!result.diverged);
        assert_eq!(result.batch.frame_count(), 2);
        assert_eq!(result.batch.channels().len(), 1);
    }

    #[test]
    fn runs_are_reproducible_for_a_seed() {
        let stack = tiny_stack(16, 16);
        let cfg = tiny_config(5);
        let a = optimize(&stack, &cfg, None, Arc::new(KernelCache::new())).unwrap();
        let b = optimize(&stack, &cfg, None, Arc::new(KernelCache::new())).unwrap();
        for (ra, rb) in a.history.iter().zip(&b.history) {
            assert_eq!(ra.loss.to_bits(), rb.loss.to_bits());
        }
        for (ca, cb) in a.batch.channels().iter().zip(b.batch.channels()) {
            assert_eq!(ca.global_scale.to_bits(), cb.global_scale.to_bits());
            for (fa, fb) in ca.frames.iter().zip(&cb.frames) {
                assert_eq!(fa.values(), fb.values());
            }
        }
    }

    #[test]
    fn ablations_shrink_the_model() {
        let stack = tiny_stack(16, 16);
        let mut cfg = tiny_config(1);
        cfg.ablation =
            AblationFlags { center_pupil_only: true, single_frame: true, first_order_only: true };
        let result = optimize(&stack, &cfg, None, Arc::new(KernelCache::new())).unwrap();
        assert_eq!(result.batch.frame_count(), 1);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = tiny_config(1);
        cfg.channels = vec![1, 1];
        assert!(cfg.validate().is_err());
        let mut cfg = tiny_config(1);
        cfg.frames = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = tiny_config(1);
        cfg.step_size = 0.0;
        assert!(cfg.validate().is_err());
    }
}
