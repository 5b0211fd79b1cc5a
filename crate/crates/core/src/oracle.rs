//! Slow reference implementations used to cross-check the fast paths.
//!
//! The reference propagation below re-derives every step with direct
//! quadruple-loop discrete Fourier sums and an inline transfer function,
//! sharing no transform or kernel code with [`crate::propagation`]. It is
//! deliberately quadratic per output sample and refuses large inputs.

use crate::error::{Error, Result};
use crate::field::{signed_bin, ComplexField, PhasePattern};
use crate::loss::{
    ChannelBatch, EvalConfig, Evaluator, HologramBatch, LossNorm, PupilFilter, ScaleMode,
    ScaleSet, SupervisedTargets,
};
use crate::propagation::{propagate, Padding};
use crate::reconstruct::{PupilKind, PupilSpec};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

/// Largest input edge `dft_oracle` accepts.
pub const ORACLE_MAX_EDGE: usize = 16;

fn direct_dft2(data: &[Complex64], w: usize, h: usize, inverse: bool) -> Vec<Complex64> {
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut out = vec![Complex64::new(0.0, 0.0); w * h];
    for kr in 0..h {
        for kc in 0..w {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..h {
                for c in 0..w {
                    let ph = sign
                        * TAU
                        * (kr as f64 * r as f64 / h as f64 + kc as f64 * c as f64 / w as f64);
                    acc += data[r * w + c] * Complex64::new(ph.cos(), ph.sin());
                }
            }
            out[kr * w + kc] = if inverse { acc / (w * h) as f64 } else { acc };
        }
    }
    out
}

/// Propagates `field` by brute-force DFT sums and a freshly derived
/// transfer function. Mirrors [`propagate`] including the padding mode,
/// and errors on inputs larger than 16 x 16.
pub fn dft_oracle(field: &ComplexField, distance: f64, padding: Padding) -> Result<ComplexField> {
    if field.width() > ORACLE_MAX_EDGE || field.height() > ORACLE_MAX_EDGE {
        return Err(Error::invalid(format!(
            "oracle refuses fields larger than {ORACLE_MAX_EDGE}x{ORACLE_MAX_EDGE}"
        )));
    }
    field.validate_finite()?;
    if !distance.is_finite() {
        return Err(Error::invalid("propagation distance must be finite"));
    }
    let (w, h) = (field.width(), field.height());
    let (lambda, pitch) = (field.wavelength(), field.pitch());

    // Embed exactly as the fast path does for the requested padding mode.
    let (pw, ph, ox, oy) = match padding {
        Padding::None => (w, h, 0, 0),
        Padding::Double => (2 * w, 2 * h, w / 2, h / 2),
    };
    let mut buf = vec![Complex64::new(0.0, 0.0); pw * ph];
    for y in 0..h {
        for x in 0..w {
            buf[(y + oy) * pw + (x + ox)] = field.get(x, y);
        }
    }

    let mut spectrum = direct_dft2(&buf, pw, ph, false);
    for row in 0..ph {
        let fy = signed_bin(row, ph) as f64 / (ph as f64 * pitch);
        for col in 0..pw {
            let fx = signed_bin(col, pw) as f64 / (pw as f64 * pitch);
            let kt2 = (lambda * fx).powi(2) + (lambda * fy).powi(2);
            spectrum[row * pw + col] *= if (fx * fx + fy * fy).sqrt() < 1.0 / lambda {
                let arg = TAU / lambda * (1.0 - kt2).sqrt() * distance;
                Complex64::new(arg.cos(), arg.sin())
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
    }
    let back = direct_dft2(&spectrum, pw, ph, true);

    let mut out = vec![Complex64::new(0.0, 0.0); w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = back[(y + oy) * pw + (x + ox)];
        }
    }
    ComplexField::new(w, h, pitch, lambda, out)
}

/// Outcome of one oracle comparison sweep.
#[derive(Debug, Clone)]
pub struct OracleReport {
    pub cases: usize,
    pub max_abs_error: f64,
    pub tolerance: f64,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.max_abs_error < self.tolerance
    }
}

/// Compares [`propagate`] against [`dft_oracle`] on `cases` random 8 x 8
/// fields over random distances, in both padding modes.
pub fn run_propagation_check(cases: usize, seed: u64) -> Result<OracleReport> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut max_err = 0.0f64;
    for case in 0..cases {
        let data: Vec<Complex64> = (0..64)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let field = ComplexField::new(8, 8, 8e-6, 520e-9, data)?;
        let distance = rng.random_range(-5e-3..5e-3);
        let padding = if case % 2 == 0 { Padding::None } else { Padding::Double };
        let fast = propagate(&field, distance, padding)?;
        let slow = dft_oracle(&field, distance, padding)?;
        for (a, b) in fast.data().iter().zip(slow.data()) {
            max_err = max_err.max((a - b).norm());
        }
    }
    Ok(OracleReport { cases, max_abs_error: max_err, tolerance: 1e-10 })
}

/// Central-difference step for gradient probes; phases and scales are
/// both order one.
const FD_STEP: f64 = 1e-5;

/// Relative agreement demanded between analytic and finite-difference
/// gradients.
pub const GRADIENT_TOLERANCE: f64 = 1e-4;

/// One loss configuration exercised by the gradient check.
struct GradientScene {
    name: String,
    batch: HologramBatch,
    pupils: Vec<PupilFilter>,
    targets: SupervisedTargets,
    scales: ScaleSet,
    config: EvalConfig,
}

#[derive(Debug, Clone)]
pub struct GradientCaseReport {
    pub name: String,
    pub probes: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone)]
pub struct GradientReport {
    pub cases: Vec<GradientCaseReport>,
    pub tolerance: f64,
}

impl GradientReport {
    pub fn max_rel_error(&self) -> f64 {
        self.cases.iter().fold(0.0, |m, c| m.max(c.max_rel_error))
    }

    pub fn passed(&self) -> bool {
        self.max_rel_error() < self.tolerance
    }
}

fn random_phases(rng: &mut ChaCha8Rng, w: usize, h: usize, frames: usize) -> Vec<PhasePattern> {
    (0..frames)
        .map(|_| {
            let values = (0..w * h).map(|_| rng.random_range(0.0..TAU)).collect();
            PhasePattern::new(w, h, 8e-6, values).expect("random phases are valid")
        })
        .collect()
}

fn random_targets(
    rng: &mut ChaCha8Rng,
    w: usize,
    h: usize,
    depths: Vec<f64>,
    channels: usize,
) -> SupervisedTargets {
    let amplitudes = (0..channels)
        .map(|_| {
            depths
                .iter()
                .map(|_| (0..w * h).map(|_| rng.random_range(0.2..1.2)).collect())
                .collect()
        })
        .collect();
    SupervisedTargets::new(w, h, depths, amplitudes).expect("random targets are valid")
}

fn random_laser(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Vec<f64> {
    (0..w * h).map(|_| rng.random_range(0.5..1.5)).collect()
}

fn disk(cx: f64, cy: f64, radius: f64) -> PupilFilter {
    PupilFilter::Disk(
        PupilSpec::new(cx, cy, radius, PupilKind::Fixed).expect("valid pupil"),
    )
}

/// The fixed scene list: together the cases cover single and multiple
/// frames and channels, open and disk pupils, both residual norms, both
/// scale modes, tiled and untiled spectra, and the envelope toggle.
fn gradient_scenes(seed: u64) -> Vec<GradientScene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scenes = Vec::new();

    {
        let (w, h) = (12, 12);
        let batch = HologramBatch::new(vec![ChannelBatch::new(
            520e-9,
            1.0,
            random_phases(&mut rng, w, h, 1),
        )
        .unwrap()])
        .unwrap();
        scenes.push(GradientScene {
            name: "single-frame-open".into(),
            targets: random_targets(&mut rng, w, h, vec![1.5e-3, -1.0e-3], 1),
            scales: ScaleSet::uniform(w, h, 1),
            pupils: vec![PupilFilter::Open],
            config: EvalConfig { orders: 1, ..EvalConfig::default() },
            batch,
        });
    }

    {
        let (w, h) = (12, 10);
        let batch = HologramBatch::new(vec![ChannelBatch::new(
            632e-9,
            1.3,
            random_phases(&mut rng, w, h, 2),
        )
        .unwrap()])
        .unwrap();
        scenes.push(GradientScene {
            name: "tiled-disk-two-frames".into(),
            targets: random_targets(&mut rng, w, h, vec![2.0e-3], 1),
            scales: ScaleSet::new(random_laser(&mut rng, w, h), vec![0.8]).unwrap(),
            pupils: vec![disk(0.5e-3, -0.3e-3, 1.5e-3)],
            config: EvalConfig { orders: 3, ..EvalConfig::default() },
            batch,
        });
    }

    {
        let (w, h) = (10, 12);
        let batch = HologramBatch::new(vec![
            ChannelBatch::new(632e-9, 1.1, random_phases(&mut rng, w, h, 2)).unwrap(),
            ChannelBatch::new(450e-9, 0.9, random_phases(&mut rng, w, h, 2)).unwrap(),
        ])
        .unwrap();
        scenes.push(GradientScene {
            name: "two-channel-phase-argument".into(),
            targets: random_targets(&mut rng, w, h, vec![1.0e-3, 3.0e-3], 2),
            scales: ScaleSet::new(vec![1.0; w * h], vec![1.0, 0.6]).unwrap(),
            pupils: vec![PupilFilter::Open, disk(1.0e-3, 0.0, 1.2e-3)],
            config: EvalConfig {
                orders: 3,
                scale_mode: ScaleMode::PhaseArgument,
                ..EvalConfig::default()
            },
            batch,
        });
    }

    {
        let (w, h) = (12, 12);
        let batch = HologramBatch::new(vec![ChannelBatch::new(
            520e-9,
            1.0,
            random_phases(&mut rng, w, h, 1),
        )
        .unwrap()])
        .unwrap();
        scenes.push(GradientScene {
            name: "absolute-residual-disk".into(),
            targets: random_targets(&mut rng, w, h, vec![2.5e-3], 1),
            scales: ScaleSet::uniform(w, h, 1),
            pupils: vec![disk(-0.8e-3, 0.6e-3, 2.0e-3)],
            config: EvalConfig {
                orders: 3,
                loss_norm: LossNorm::L1,
                ..EvalConfig::default()
            },
            batch,
        });
    }

    {
        let (w, h) = (14, 14);
        let batch = HologramBatch::new(vec![ChannelBatch::new(
            520e-9,
            0.7,
            random_phases(&mut rng, w, h, 3),
        )
        .unwrap()])
        .unwrap();
        scenes.push(GradientScene {
            name: "no-envelope-three-frames".into(),
            targets: random_targets(&mut rng, w, h, vec![-2.0e-3, 1.0e-3], 1),
            scales: ScaleSet::new(random_laser(&mut rng, w, h), vec![0.5]).unwrap(),
            pupils: vec![disk(0.0, 0.0, 1.8e-3)],
            config: EvalConfig {
                orders: 1,
                apply_envelope: false,
                ..EvalConfig::default()
            },
            batch,
        });
    }

    scenes
}

fn relative_error(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-7)
}

fn check_scene(
    scene: &GradientScene,
    probes_per_frame: usize,
    rng: &mut ChaCha8Rng,
) -> Result<GradientCaseReport> {
    let eval = Evaluator::new(scene.config.clone())?;
    let analytic = eval
        .evaluate(&scene.batch, &scene.pupils, &scene.targets, &scene.scales, true)?
        .gradient
        .expect("gradient requested");
    let npx = scene.batch.width() * scene.batch.height();
    let mut max_rel = 0.0f64;
    let mut probes = 0usize;

    let fd_loss = |batch: &HologramBatch| -> Result<f64> {
        eval.forward_loss(batch, &scene.pupils, &scene.targets, &scene.scales)
    };

    for c in 0..scene.batch.channels().len() {
        for t in 0..scene.batch.frame_count() {
            // The loss difference carries summation roundoff of order
            // machine epsilon times the loss, so the quotient only
            // resolves derivatives well above that floor. Probing a
            // coordinate far below the frame's rms derivative would
            // compare noise, not the gradient; restrict draws to
            // coordinates carrying at least a tenth of the rms.
            let frame = &analytic.phase[c][t];
            let rms = (frame.iter().map(|g| g * g).sum::<f64>() / npx as f64).sqrt();
            let eligible: Vec<usize> =
                (0..npx).filter(|&i| frame[i].abs() >= 0.1 * rms).collect();
            for _ in 0..probes_per_frame {
                let i = if eligible.is_empty() {
                    rng.random_range(0..npx)
                } else {
                    eligible[rng.random_range(0..eligible.len())]
                };
                let mut plus = scene.batch.clone();
                plus.channels_mut()[c].frames[t].values_mut()[i] += FD_STEP;
                let mut minus = scene.batch.clone();
                minus.channels_mut()[c].frames[t].values_mut()[i] -= FD_STEP;
                let fd = (fd_loss(&plus)? - fd_loss(&minus)?) / (2.0 * FD_STEP);
                max_rel = max_rel.max(relative_error(frame[i], fd));
                probes += 1;
            }
        }
        let mut plus = scene.batch.clone();
        plus.channels_mut()[c].global_scale += FD_STEP;
        let mut minus = scene.batch.clone();
        minus.channels_mut()[c].global_scale -= FD_STEP;
        let fd = (fd_loss(&plus)? - fd_loss(&minus)?) / (2.0 * FD_STEP);
        max_rel = max_rel.max(relative_error(analytic.global_scale[c], fd));
        probes += 1;
    }

    Ok(GradientCaseReport { name: scene.name.clone(), probes, max_rel_error: max_rel })
}

/// Checks analytic loss gradients against central finite differences on
/// the scene list above, probing a handful of random phase pixels per
/// frame plus every global scale.
pub fn run_gradient_check(seed: u64) -> Result<GradientReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut cases = Vec::new();
    for scene in gradient_scenes(seed) {
        cases.push(check_scene(&scene, 6, &mut rng)?);
    }
    Ok(GradientReport { cases, tolerance: GRADIENT_TOLERANCE })
}

/// `configs` random scenes in one canonical shape — 16 x 16 patterns,
/// two frames, two supervised planes, two pupils — with everything else
/// (wavelength, depths, pupil geometry, scales, scale mode) drawn from
/// the seed, and the order count alternating between one and three.
/// Complements [`gradient_scenes`], whose scenes are hand-picked for
/// coverage rather than uniform in shape.
///
/// All canonical scenes use the squared norm: central differences only
/// measure a derivative where the objective is smooth, and the absolute
/// norm has kinks wherever a residual changes sign. The absolute norm's
/// gradient is exercised by the hand-picked scenes instead.
fn canonical_scenes(configs: usize, seed: u64) -> Vec<GradientScene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (16, 16);
    (0..configs)
        .map(|i| {
            let wavelength = [632e-9, 520e-9, 450e-9][i % 3];
            let batch = HologramBatch::new(vec![ChannelBatch::new(
                wavelength,
                rng.random_range(0.7..1.3),
                random_phases(&mut rng, w, h, 2),
            )
            .unwrap()])
            .unwrap();
            let depths =
                vec![rng.random_range(-3e-3..-0.5e-3), rng.random_range(0.5e-3..3e-3)];
            let pupils = vec![
                disk(
                    rng.random_range(-1.5e-3..1.5e-3),
                    rng.random_range(-1.5e-3..1.5e-3),
                    rng.random_range(1e-3..2e-3),
                ),
                if rng.random_range(0..3) == 0 {
                    PupilFilter::Open
                } else {
                    disk(0.0, rng.random_range(-1e-3..1e-3), rng.random_range(1e-3..2e-3))
                },
            ];
            let scales = ScaleSet::new(
                random_laser(&mut rng, w, h),
                vec![rng.random_range(0.5..1.2), rng.random_range(0.5..1.2)],
            )
            .unwrap();
            GradientScene {
                name: format!("canonical-{i}"),
                targets: random_targets(&mut rng, w, h, depths, 1),
                scales,
                pupils,
                config: EvalConfig {
                    orders: if i % 2 == 0 { 1 } else { 3 },
                    loss_norm: LossNorm::L2,
                    scale_mode: if i % 3 == 0 {
                        ScaleMode::PhaseArgument
                    } else {
                        ScaleMode::Amplitude
                    },
                    ..EvalConfig::default()
                },
                batch,
            }
        })
        .collect()
}

/// The gradient check over [`canonical_scenes`].
pub fn run_canonical_gradient_check(configs: usize, seed: u64) -> Result<GradientReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut cases = Vec::new();
    for scene in canonical_scenes(configs, seed) {
        cases.push(check_scene(&scene, 6, &mut rng)?);
    }
    Ok(GradientReport { cases, tolerance: GRADIENT_TOLERANCE })
}
