//! On-disk formats for scenes, stacks, hologram batches, calibration
//! data, and run artifacts.
//!
//! Each bulky artifact is a directory holding a `manifest.json` next to
//! its data files; numeric image data travels as little-endian f32 raw
//! files so round trips stay exact at that width, while PNGs carry
//! either 8-bit quantized phases (exact by construction) or tone-mapped
//! previews meant for human eyes only.

pub mod batch;
pub mod cache;
pub mod history;
pub mod laser;
pub mod ldi;
pub mod stack;
pub mod tone;

use crate::error::Result;
use byteorder::{LittleEndian, ReadBytesExt};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

/// Current version stamped into every manifest this crate writes.
pub const SCHEMA_VERSION: u32 = 1;

pub(crate) fn read_f32_raw(path: &Path, count: usize) -> Result<Vec<f64>> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        values.push(reader.read_f32::<LittleEndian>()? as f64);
    }
    Ok(values)
}

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}
