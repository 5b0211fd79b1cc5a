//! Layered-depth-image directories.
//!
//! An LDI on disk is a directory with a `manifest.json` and one
//! color/depth file pair per layer:
//!
//! - color: 8-bit RGB PNG, display-gamma encoded; loading linearizes
//!   with gamma 2.2,
//! - depth: little-endian f32 raw, row-major, in meters; a NaN marks an
//!   invalid sample (a hole in that layer).
//!
//! Saving quantizes colors to 8 bits and depths to f32; depth ordering
//! survives because f32 conversion is monotonic.

use super::{read_f32_raw, read_json, write_json, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::io::tone::DISPLAY_GAMMA;
use crate::ldi::{LayeredDepthImage, LdiLayer};
use byteorder::{LittleEndian, WriteBytesExt};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

#[derive(Debug, serde::Serialize, serde::Deserialize)]
struct LayerEntry {
    color: String,
    depth: String,
}

#[derive(Debug, serde::Serialize, serde::Deserialize)]
struct LdiManifest {
    schema_version: u32,
    width: usize,
    height: usize,
    layers: Vec<LayerEntry>,
}

/// Loads an LDI directory via its `manifest.json`.
pub fn load_ldi(dir: &Path) -> Result<LayeredDepthImage> {
    let manifest: LdiManifest = read_json(&dir.join("manifest.json"))?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(Error::invalid(format!(
            "unsupported LDI schema version {}",
            manifest.schema_version
        )));
    }
    let n = manifest.width * manifest.height;
    let mut layers = Vec::with_capacity(manifest.layers.len());
    for entry in &manifest.layers {
        let img = image::open(dir.join(&entry.color))?.to_rgb8();
        if img.width() as usize != manifest.width || img.height() as usize != manifest.height
        {
            return Err(Error::mismatch(format!(
                "color image {} does not match the manifest dimensions",
                entry.color
            )));
        }
        let color: Vec<[f64; 3]> = img
            .pixels()
            .map(|px| {
                [
                    (px.0[0] as f64 / 255.0).powf(DISPLAY_GAMMA),
                    (px.0[1] as f64 / 255.0).powf(DISPLAY_GAMMA),
                    (px.0[2] as f64 / 255.0).powf(DISPLAY_GAMMA),
                ]
            })
            .collect();
        let depth = read_f32_raw(&dir.join(&entry.depth), n)?;
        let valid: Vec<bool> = depth.iter().map(|d| d.is_finite()).collect();
        layers.push(LdiLayer::new(color, depth, valid));
    }
    LayeredDepthImage::new(manifest.width, manifest.height, layers)
}

/// Saves an LDI as a directory; see the module docs for the layout.
pub fn save_ldi(ldi: &LayeredDepthImage, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let (w, h) = (ldi.width(), ldi.height());
    let mut entries = Vec::with_capacity(ldi.layer_count());
    for l in 0..ldi.layer_count() {
        let color_name = format!("layer{l:02}_color.png");
        let depth_name = format!("layer{l:02}_depth.raw");

        let mut img = image::RgbImage::new(w as u32, h as u32);
        for y in 0..h {
            for x in 0..w {
                let c = ldi.color(x, y, l);
                let px = [
                    (c[0].clamp(0.0, 1.0).powf(1.0 / DISPLAY_GAMMA) * 255.0).round() as u8,
                    (c[1].clamp(0.0, 1.0).powf(1.0 / DISPLAY_GAMMA) * 255.0).round() as u8,
                    (c[2].clamp(0.0, 1.0).powf(1.0 / DISPLAY_GAMMA) * 255.0).round() as u8,
                ];
                img.put_pixel(x as u32, y as u32, image::Rgb(px));
            }
        }
        img.save(dir.join(&color_name))?;

        let mut out = BufWriter::new(File::create(dir.join(&depth_name))?);
        for y in 0..h {
            for x in 0..w {
                let v = if ldi.is_valid(x, y, l) {
                    ldi.depth(x, y, l) as f32
                } else {
                    f32::NAN
                };
                out.write_f32::<LittleEndian>(v)?;
            }
        }
        out.flush()?;
        entries.push(LayerEntry { color: color_name, depth: depth_name });
    }
    write_json(
        &dir.join("manifest.json"),
        &LdiManifest { schema_version: SCHEMA_VERSION, width: w, height: h, layers: entries },
    )
}
