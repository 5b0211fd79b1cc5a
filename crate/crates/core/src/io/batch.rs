//! Hologram-batch directories.
//!
//! A batch directory holds `manifest.json` plus one 8-bit grayscale PNG
//! per (channel, frame): pixel value `q` encodes the phase
//! `q * 2*pi / 256`. Saving therefore quantizes each phase to within
//! half of one level (`pi / 256`) of its wrapped value — exactly the
//! precision a 256-level display delivers — and loading is lossless
//! against the quantized batch.

use super::{read_json, write_json, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::field::PhasePattern;
use crate::loss::{ChannelBatch, HologramBatch};
use std::path::Path;

#[derive(Debug, serde::Serialize, serde::Deserialize)]
struct ChannelEntry {
    wavelength: f64,
    global_scale: f64,
    frames: Vec<String>,
}

#[derive(Debug, serde::Serialize, serde::Deserialize)]
struct BatchManifest {
    schema_version: u32,
    width: usize,
    height: usize,
    pitch: f64,
    channels: Vec<ChannelEntry>,
    /// Arbitrary run metadata echoed by the writer (configuration,
    /// seed); loaders pass it through untouched.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metadata: Option<serde_json::Value>,
}

/// Saves a batch as quantized phase PNGs plus a manifest. `metadata`
/// is stored verbatim for provenance (seed, configuration echo).
pub fn save_batch(
    batch: &HologramBatch,
    dir: &Path,
    metadata: Option<serde_json::Value>,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let (w, h) = (batch.width(), batch.height());
    let mut channels = Vec::with_capacity(batch.channels().len());
    for (c, chan) in batch.channels().iter().enumerate() {
        let mut frames = Vec::with_capacity(chan.frames.len());
        for (t, frame) in chan.frames.iter().enumerate() {
            let name = format!("c{c}_f{t:02}.png");
            let levels = frame.quantize();
            let img = image::GrayImage::from_raw(w as u32, h as u32, levels)
                .expect("quantized frame matches its dimensions");
            img.save(dir.join(&name))?;
            frames.push(name);
        }
        channels.push(ChannelEntry {
            wavelength: chan.wavelength,
            global_scale: chan.global_scale,
            frames,
        });
    }
    write_json(
        &dir.join("manifest.json"),
        &BatchManifest {
            schema_version: SCHEMA_VERSION,
            width: w,
            height: h,
            pitch: batch.pitch(),
            channels,
            metadata,
        },
    )
}

/// Loads a batch saved by [`save_batch`], with its stored metadata.
pub fn load_batch(dir: &Path) -> Result<(HologramBatch, Option<serde_json::Value>)> {
    let manifest: BatchManifest = read_json(&dir.join("manifest.json"))?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(Error::invalid(format!(
            "unsupported batch schema version {}",
            manifest.schema_version
        )));
    }
    let mut channels = Vec::with_capacity(manifest.channels.len());
    for entry in &manifest.channels {
        let mut frames = Vec::with_capacity(entry.frames.len());
        for name in &entry.frames {
            let img = image::open(dir.join(name))?.to_luma8();
            if img.width() as usize != manifest.width
                || img.height() as usize != manifest.height
            {
                return Err(Error::mismatch(format!(
                    "frame {name} does not match the manifest dimensions"
                )));
            }
            frames.push(PhasePattern::from_quantized(
                manifest.width,
                manifest.height,
                manifest.pitch,
                img.as_raw(),
            )?);
        }
        channels.push(ChannelBatch::new(entry.wavelength, entry.global_scale, frames)?);
    }
    Ok((HologramBatch::new(channels)?, manifest.metadata))
}
