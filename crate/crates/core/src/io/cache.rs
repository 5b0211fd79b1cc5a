//! Binary sidecar persistence for the transfer-function cache.
//!
//! Transfer tables are pure functions of their key, so the sidecar is a
//! plain dump: a magic header, an entry count, then each key with its
//! complex table at full f64 width. Loading merges entries into an
//! existing cache without displacing ones already present.

use crate::error::{Error, Result};
use crate::reconstruct::{KernelCache, TransferKey};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use num_complex::Complex64;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

const MAGIC: &[u8; 8] = b"HOLOKCH1";

/// Writes every cached transfer table to `path`.
pub fn save_cache(cache: &KernelCache, path: &Path) -> Result<()> {
    let entries = cache.entries.read().unwrap();
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_u64::<LittleEndian>(entries.len() as u64)?;
    // Deterministic file bytes: order by key.
    let mut sorted: Vec<_> = entries.iter().collect();
    sorted.sort_by_key(|(k, _)| {
        (
            k.base_width,
            k.base_height,
            k.supersample,
            k.pitch_bits,
            k.wavelength_bits,
            k.distance_bits,
            k.envelope,
        )
    });
    for (key, table) in sorted {
        out.write_u64::<LittleEndian>(key.distance_bits)?;
        out.write_u64::<LittleEndian>(key.wavelength_bits)?;
        out.write_u64::<LittleEndian>(key.base_width as u64)?;
        out.write_u64::<LittleEndian>(key.base_height as u64)?;
        out.write_u64::<LittleEndian>(key.pitch_bits)?;
        out.write_u64::<LittleEndian>(key.supersample as u64)?;
        out.write_u8(key.envelope as u8)?;
        out.write_u64::<LittleEndian>(table.len() as u64)?;
        for v in table.iter() {
            out.write_f64::<LittleEndian>(v.re)?;
            out.write_f64::<LittleEndian>(v.im)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Merges the tables stored at `path` into `cache`.
pub fn load_cache(cache: &KernelCache, path: &Path) -> Result<usize> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    reader.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::invalid("not a transfer cache file"));
    }
    let count = reader.read_u64::<LittleEndian>()? as usize;
    let mut loaded = 0usize;
    for _ in 0..count {
        let key = TransferKey {
            distance_bits: reader.read_u64::<LittleEndian>()?,
            wavelength_bits: reader.read_u64::<LittleEndian>()?,
            base_width: reader.read_u64::<LittleEndian>()? as usize,
            base_height: reader.read_u64::<LittleEndian>()? as usize,
            pitch_bits: reader.read_u64::<LittleEndian>()?,
            supersample: reader.read_u64::<LittleEndian>()? as usize,
            envelope: reader.read_u8()? != 0,
        };
        let len = reader.read_u64::<LittleEndian>()? as usize;
        let expect =
            key.base_width * key.supersample * key.base_height * key.supersample;
        if len != expect {
            return Err(Error::invalid(format!(
                "cache entry length {len} does not match its grid ({expect})"
            )));
        }
        let mut table = Vec::with_capacity(len);
        for _ in 0..len {
            let re = reader.read_f64::<LittleEndian>()?;
            let im = reader.read_f64::<LittleEndian>()?;
            table.push(Complex64::new(re, im));
        }
        cache.entries.write().unwrap().entry(key).or_insert_with(|| Arc::new(table));
        loaded += 1;
    }
    Ok(loaded)
}
