//! Run configuration: a JSON file with optional sections, merged over
//! built-in defaults, resolved into the core parameter structs.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use holo_core::incoherent::MaskSpec;
use holo_core::ldi::LayeredDepthImage;
use holo_core::loss::{EvalConfig, LossNorm, Precision, PupilFilter, ScaleMode};
use holo_core::optimize::{AblationFlags, OptimizerConfig};
use holo_core::pupils::{EyeBox, PupilSetConfig};
use holo_core::reconstruct::{PupilKind, PupilSpec};
use holo_core::render::RenderParams;
use holo_core::visibility::default_depth_tolerance;
use holo_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// A physical length in meters. JSON accepts either a bare number
/// (meters) or a string with a unit suffix: `"8um"`, `"2mm"`, `"632nm"`,
/// `"80 mm"`, `"0.08m"`. Serializes back as meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LengthRepr", into = "f64")]
pub struct Length(pub f64);

#[derive(Deserialize)]
#[serde(untagged)]
enum LengthRepr {
    Meters(f64),
    Text(String),
}

impl TryFrom<LengthRepr> for Length {
    type Error = String;

    fn try_from(repr: LengthRepr) -> std::result::Result<Self, String> {
        match repr {
            LengthRepr::Meters(m) => {
                if m.is_finite() {
                    Ok(Length(m))
                } else {
                    Err("length must be finite".into())
                }
            }
            LengthRepr::Text(text) => text.parse(),
        }
    }
}

impl From<Length> for f64 {
    fn from(length: Length) -> f64 {
        length.0
    }
}

/// Unit suffixes, longest first so `"mm"` wins over the trailing `"m"`.
const UNITS: [(&str, f64); 6] =
    [("nm", 1e-9), ("um", 1e-6), ("µm", 1e-6), ("mm", 1e-3), ("cm", 1e-2), ("m", 1.0)];

impl FromStr for Length {
    type Err = String;

    fn from_str(text: &str) -> std::result::Result<Self, String> {
        let text = text.trim();
        let (number, scale) = UNITS
            .iter()
            .find_map(|(suffix, scale)| {
                text.strip_suffix(suffix).map(|prefix| (prefix.trim_end(), *scale))
            })
            .unwrap_or((text, 1.0));
        let value: f64 = number
            .parse()
            .map_err(|_| format!("cannot parse length {text:?}; try e.g. \"8um\" or 8e-6"))?;
        if !value.is_finite() {
            return Err(format!("length {text:?} is not finite"));
        }
        Ok(Length(value * scale))
    }
}

impl fmt::Display for Length {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e}m", self.0)
    }
}

/// The whole run configuration; every section and field is optional in
/// the JSON file and falls back to the defaults below.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub display: DisplaySection,
    pub render: RenderSection,
    pub optimize: OptimizeSection,
    pub eval: EvalSection,
}

/// Display geometry shared by every command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisplaySection {
    /// Hologram pixel pitch.
    pub pitch: Length,
    /// Source wavelengths for the red, green, and blue channels.
    pub wavelengths: [Length; 3],
    /// Focal length of the eyepiece between display and exit pupil.
    pub focal_length: Length,
}

impl Default for DisplaySection {
    fn default() -> Self {
        DisplaySection {
            pitch: Length(8e-6),
            wavelengths: [Length(632e-9), Length(520e-9), Length(450e-9)],
            focal_length: Length(80e-3),
        }
    }
}

/// Focal-stack rendering settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderSection {
    /// Number of evenly spaced focal planes when `depths` is empty.
    pub planes: usize,
    /// Nearest plane; defaults to the closest scene depth.
    pub near: Option<Length>,
    /// Farthest plane; defaults to the deepest scene depth.
    pub far: Option<Length>,
    /// Explicit plane depths, overriding `planes`/`near`/`far`.
    pub depths: Vec<Length>,
    /// PSF cone half-angle in degrees; default is the diffraction limit
    /// of the sampling.
    pub max_angle_deg: Option<f64>,
    /// Visibility-ray depth tolerance; default derives from the plane
    /// spacing.
    pub depth_tolerance: Option<Length>,
}

impl Default for RenderSection {
    fn default() -> Self {
        RenderSection {
            planes: 6,
            near: None,
            far: None,
            depths: Vec::new(),
            max_angle_deg: None,
            depth_tolerance: None,
        }
    }
}

/// Pupil sampling for the optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PupilSection {
    pub total: usize,
    pub fixed: usize,
    pub random: usize,
    pub base_radius: Length,
    pub eye_box: BoxSection,
}

impl Default for PupilSection {
    fn default() -> Self {
        let core = PupilSetConfig::default_eye_box();
        PupilSection {
            total: core.total,
            fixed: core.fixed,
            random: core.random,
            base_radius: Length(core.base_radius),
            eye_box: BoxSection {
                x_min: Length(core.eye_box.x_min),
                y_min: Length(core.eye_box.y_min),
                x_max: Length(core.eye_box.x_max),
                y_max: Length(core.eye_box.y_max),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSection {
    pub x_min: Length,
    pub y_min: Length,
    pub x_max: Length,
    pub y_max: Length,
}

/// Optimizer settings; mirrors the core configuration with lengths
/// accepted in unit-suffix form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeSection {
    pub frames: usize,
    pub iterations: usize,
    pub step_size: f64,
    pub seed: u64,
    pub channels: Vec<usize>,
    pub plane_indices: Vec<usize>,
    pub pupil_normalization: bool,
    /// Fit global scales in closed form before iterating.
    pub prefit: bool,
    pub pupils: PupilSection,
    /// Diffraction orders simulated per axis (odd).
    pub orders: usize,
    /// Apply the pixel-aperture falloff to the propagation model.
    pub envelope: bool,
    pub scale_mode: ScaleMode,
    pub loss_norm: LossNorm,
    pub precision: Precision,
    pub intensity_floor: f64,
    pub ablation: AblationFlags,
}

impl Default for OptimizeSection {
    fn default() -> Self {
        let core = OptimizerConfig::default();
        OptimizeSection {
            frames: core.frames,
            iterations: core.iterations,
            step_size: core.step_size,
            seed: core.seed,
            channels: core.channels,
            plane_indices: core.plane_indices,
            pupil_normalization: core.pupil_normalization,
            prefit: core.prefit,
            pupils: PupilSection::default(),
            orders: core.eval.orders,
            envelope: core.eval.apply_envelope,
            scale_mode: core.eval.scale_mode,
            loss_norm: core.eval.loss_norm,
            precision: core.eval.precision,
            intensity_floor: core.eval.intensity_floor,
            ablation: core.ablation,
        }
    }
}

/// Viewing pupil used by `eval` and `sweep focus`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Pupil center relative to the optical axis; default is on-axis.
    pub pupil_x: Option<Length>,
    pub pupil_y: Option<Length>,
    /// Pupil radius; default is the optimizer's base radius.
    pub pupil_radius: Option<Length>,
}

impl RunConfig {
    /// Loads the file when given, the built-in defaults otherwise.
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        match path {
            None => Ok(RunConfig::default()),
            Some(path) => {
                let file = std::fs::File::open(path)?;
                let config = serde_json::from_reader(std::io::BufReader::new(file))?;
                Ok(config)
            }
        }
    }

    pub fn wavelengths(&self) -> [f64; 3] {
        let w = &self.display.wavelengths;
        [w[0].0, w[1].0, w[2].0]
    }

    /// Focal-plane depths for rendering: the explicit list if present,
    /// otherwise `planes` evenly spaced positions between `near` and
    /// `far` (scene depth bounds by default).
    pub fn plane_depths(&self, ldi: &LayeredDepthImage) -> Result<Vec<f64>> {
        if !self.render.depths.is_empty() {
            return Ok(self.render.depths.iter().map(|d| d.0).collect());
        }
        let (scene_near, scene_far) = ldi.depth_bounds();
        let near = self.render.near.map_or(scene_near, |l| l.0);
        let far = self.render.far.map_or(scene_far, |l| l.0);
        let count = self.render.planes;
        if count == 0 {
            return Err(Error::invalid("at least one focal plane is required"));
        }
        if count > 1 && !(near < far) {
            return Err(Error::invalid(format!(
                "cannot place {count} planes between {near:.4e} and {far:.4e}; \
                 pass distinct near/far bounds"
            )));
        }
        if count == 1 {
            return Ok(vec![(near + far) / 2.0]);
        }
        Ok((0..count)
            .map(|i| near + (far - near) * i as f64 / (count - 1) as f64)
            .collect())
    }

    pub fn render_params(&self, ldi: &LayeredDepthImage) -> Result<RenderParams> {
        let plane_depths = self.plane_depths(ldi)?;
        let span = plane_depths.last().unwrap() - plane_depths.first().unwrap();
        // A flat or single-plane volume derives a zero tolerance; fall
        // back to the pixel pitch as the smallest meaningful length.
        let derived = default_depth_tolerance(span, plane_depths.len());
        let depth_tolerance = self
            .render
            .depth_tolerance
            .map(|l| l.0)
            .unwrap_or(if derived > 0.0 { derived } else { self.display.pitch.0 });
        let mask = match self.render.max_angle_deg {
            None => MaskSpec::default_circular(),
            Some(deg) => MaskSpec::Circular { max_angle: Some(deg.to_radians()) },
        };
        let params = RenderParams {
            plane_depths,
            wavelengths: self.wavelengths(),
            pitch: self.display.pitch.0,
            mask,
            depth_tolerance,
        };
        params.validate()?;
        Ok(params)
    }

    fn pupil_set(&self) -> PupilSetConfig {
        let p = &self.optimize.pupils;
        PupilSetConfig {
            total: p.total,
            fixed: p.fixed,
            random: p.random,
            base_radius: p.base_radius.0,
            eye_box: EyeBox {
                x_min: p.eye_box.x_min.0,
                y_min: p.eye_box.y_min.0,
                x_max: p.eye_box.x_max.0,
                y_max: p.eye_box.y_max.0,
            },
        }
    }

    pub fn eval_config(&self) -> EvalConfig {
        let o = &self.optimize;
        EvalConfig {
            focal_length: self.display.focal_length.0,
            orders: o.orders,
            apply_envelope: o.envelope,
            scale_mode: o.scale_mode,
            loss_norm: o.loss_norm,
            precision: o.precision,
            intensity_floor: o.intensity_floor,
        }
    }

    pub fn optimizer_config(&self) -> Result<OptimizerConfig> {
        let o = &self.optimize;
        let config = OptimizerConfig {
            frames: o.frames,
            iterations: o.iterations,
            step_size: o.step_size,
            seed: o.seed,
            channels: o.channels.clone(),
            plane_indices: o.plane_indices.clone(),
            pupil_normalization: o.pupil_normalization,
            prefit: o.prefit,
            pupils: self.pupil_set(),
            eval: self.eval_config(),
            ablation: o.ablation,
        };
        config.validate()?;
        Ok(config)
    }

    /// The viewing pupil for `eval`/`sweep focus`: a disk at the
    /// configured center, base-radius sized unless overridden.
    pub fn eval_pupil(&self) -> Result<PupilFilter> {
        let e = &self.eval;
        let radius = e.pupil_radius.map_or(self.optimize.pupils.base_radius.0, |l| l.0);
        let spec = PupilSpec::new(
            e.pupil_x.map_or(0.0, |l| l.0),
            e.pupil_y.map_or(0.0, |l| l.0),
            radius,
            PupilKind::Fixed,
        )?;
        Ok(PupilFilter::Disk(spec))
    }
}
