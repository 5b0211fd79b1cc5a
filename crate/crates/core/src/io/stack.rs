//! Focal-stack directories.
//!
//! A stack directory holds `manifest.json` plus, per focal plane, an
//! interleaved-RGB little-endian f32 raw file (the data of record,
//! linear intensity) and a tone-mapped PNG preview. Loading reads only
//! the manifest and raw files; intensities round trip at f32 precision.

use super::{read_json, write_json, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::io::tone::tone_map_rgb;
use crate::render::FocalStack;
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

#[derive(Debug, serde::Serialize, serde::Deserialize)]
struct PlaneEntry {
    depth: f64,
    data: String,
    preview: String,
}

#[derive(Debug, serde::Serialize, serde::Deserialize)]
struct StackManifest {
    schema_version: u32,
    width: usize,
    height: usize,
    pitch: f64,
    wavelengths: [f64; 3],
    planes: Vec<PlaneEntry>,
}

/// Saves a focal stack as a directory; see the module docs for the
/// layout.
pub fn save_stack(stack: &FocalStack, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let (w, h) = (stack.width(), stack.height());
    let mut planes = Vec::with_capacity(stack.plane_depths().len());
    for (k, &depth) in stack.plane_depths().iter().enumerate() {
        let data_name = format!("plane{k:03}.raw");
        let preview_name = format!("plane{k:03}.png");

        let r = stack.channel_image(k, 0);
        let g = stack.channel_image(k, 1);
        let b = stack.channel_image(k, 2);
        let mut out = BufWriter::new(File::create(dir.join(&data_name))?);
        for i in 0..w * h {
            out.write_f32::<LittleEndian>(r[i] as f32)?;
            out.write_f32::<LittleEndian>(g[i] as f32)?;
            out.write_f32::<LittleEndian>(b[i] as f32)?;
        }
        out.flush()?;

        let rgb: Vec<[f64; 3]> = (0..w * h).map(|i| [r[i], g[i], b[i]]).collect();
        let mapped = tone_map_rgb(&rgb)?;
        let mut img = image::RgbImage::new(w as u32, h as u32);
        for (i, px) in mapped.iter().enumerate() {
            img.put_pixel((i % w) as u32, (i / w) as u32, image::Rgb(*px));
        }
        img.save(dir.join(&preview_name))?;

        planes.push(PlaneEntry { depth, data: data_name, preview: preview_name });
    }
    write_json(
        &dir.join("manifest.json"),
        &StackManifest {
            schema_version: SCHEMA_VERSION,
            width: w,
            height: h,
            pitch: stack.pitch(),
            wavelengths: stack.wavelengths(),
            planes,
        },
    )
}

/// Loads a focal stack saved by [`save_stack`].
pub fn load_stack(dir: &Path) -> Result<FocalStack> {
    let manifest: StackManifest = read_json(&dir.join("manifest.json"))?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(Error::invalid(format!(
            "unsupported stack schema version {}",
            manifest.schema_version
        )));
    }
    let n = manifest.width * manifest.height;
    let mut depths = Vec::with_capacity(manifest.planes.len());
    let mut planes = Vec::with_capacity(manifest.planes.len());
    for entry in &manifest.planes {
        depths.push(entry.depth);
        let mut reader = BufReader::new(File::open(dir.join(&entry.data))?);
        let mut plane = Vec::with_capacity(n);
        for _ in 0..n {
            let r = reader.read_f32::<LittleEndian>()? as f64;
            let g = reader.read_f32::<LittleEndian>()? as f64;
            let b = reader.read_f32::<LittleEndian>()? as f64;
            plane.push([r, g, b]);
        }
        planes.push(plane);
    }
    FocalStack::new(
        manifest.width,
        manifest.height,
        manifest.pitch,
        manifest.wavelengths,
        depths,
        planes,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    fn sample_stack() -> FocalStack {
        let (w, h) = (8, 6);
        let mut planes = vec![vec![[0.0; 3]; w * h]; 3];
        for (k, plane) in planes.iter_mut().enumerate() {
            for (i, px) in plane.iter_mut().enumerate() {
                px[0] = (i % 7) as f64 * 0.1 + k as f64;
                px[1] = 0.5;
                px[2] = (i % 3) as f64 * 0.25;
            }
        }
        FocalStack::new(
            w,
            h,
            8e-6,
            [632e-9, 520e-9, 450e-9],
            vec![-2e-3, 0.5e-3, 3e-3],
            planes,
        )
        .unwrap()
    }

    #[test]
    fn stack_round_trips_at_f32_precision() {
        let dir = TempDir::new().unwrap();
        let stack = sample_stack();
        save_stack(&stack, dir.path()).unwrap();
        let back = load_stack(dir.path()).unwrap();
        assert_eq!(back.width(), stack.width());
        assert_eq!(back.plane_depths(), stack.plane_depths());
        assert_eq!(back.wavelengths(), stack.wavelengths());
        for k in 0..3 {
            for c in 0..3 {
                for (a, b) in
                    stack.channel_image(k, c).iter().zip(back.channel_image(k, c))
                {
                    assert!((a - b).abs() <= a.abs() * 1e-7 + 1e-9);
                }
            }
        }
    }

    #[test]
    fn previews_exist_per_plane() {
        let dir = TempDir::new().unwrap();
        save_stack(&sample_stack(), dir.path()).unwrap();
        for k in 0..3 {
            assert!(dir.path().join(format!("plane{k:03}.png")).exists());
        }
    }
}
