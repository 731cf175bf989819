use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_manifest, sha256_hex, write_json, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::image::{Grid, RealImage};
use crate::maskgen::{count, Mask, MaskConfig};

/// JSON written next to a PBM mask (`mask.pbm` -> `mask.json`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskSidecar {
    pub format_version: u32,
    pub width: usize,
    pub height: usize,
    pub pixels: usize,
    pub settings: MaskConfig,
    pub sha256: String,
}

fn pbm_bytes(mask: &Mask) -> Vec<u8> {
    let (w, h) = (mask.width(), mask.height());
    let mut out = format!("P4\n{w} {h}\n").into_bytes();
    let row_bytes = w.div_ceil(8);
    for y in 0..h {
        let mut row = vec![0u8; row_bytes];
        for x in 0..w {
            if mask[(x, y)] {
                row[x / 8] |= 0x80 >> (x % 8);
            }
        }
        out.extend_from_slice(&row);
    }
    out
}

pub fn write_mask(path: &Path, mask: &Mask, settings: &MaskConfig) -> Result<()> {
    let bytes = pbm_bytes(mask);
    let sidecar = MaskSidecar {
        format_version: FORMAT_VERSION,
        width: mask.width(),
        height: mask.height(),
        pixels: count(mask),
        settings: *settings,
        sha256: sha256_hex(&bytes),
    };
    fs::write(path, &bytes)?;
    write_json(&path.with_extension("json"), &sidecar)
}

/// Reads the next header token, skipping whitespace and `#` comments.
fn token(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    loop {
        match bytes.get(*pos) {
            Some(b'#') => {
                while bytes.get(*pos).is_some_and(|&b| b != b'\n') {
                    *pos += 1;
                }
            }
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            _ => break,
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(|b| b.is_ascii_digit()) {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Validation("malformed PBM header".into()))
}

/// Reads a binary PBM; if the JSON sidecar exists its size and checksum must match.
pub fn read_mask(path: &Path) -> Result<Mask> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(Error::NotFound { path: path.to_path_buf() }),
        Err(e) => return Err(e.into()),
    };
    if !bytes.starts_with(b"P4") {
        return Err(Error::Validation("not a binary PBM file".into()));
    }
    let mut pos = 2;
    let w = token(&bytes, &mut pos)?;
    let h = token(&bytes, &mut pos)?;
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let row_bytes = w.div_ceil(8);
    if bytes.len() != pos + row_bytes * h {
        return Err(Error::DimensionMismatch(format!("PBM raster size does not match {w}x{h}")));
    }
    let raster = &bytes[pos..];
    let mask = Grid::from_fn(w, h, |x, y| raster[y * row_bytes + x / 8] & (0x80 >> (x % 8)) != 0);
    let sidecar_path = path.with_extension("json");
    if sidecar_path.exists() {
        let s: MaskSidecar = read_manifest(&sidecar_path)?;
        if s.width != w || s.height != h {
            return Err(Error::DimensionMismatch("mask sidecar size differs from the PBM".into()));
        }
        if s.sha256 != sha256_hex(&bytes) {
            return Err(Error::Checksum {
                file: path.display().to_string(),
            });
        }
    }
    Ok(mask)
}

/// 16-bit binary PGM of `map` windowed linearly onto `[lo, hi]`, clamped,
/// rounded half up. Non-finite values map to 0.
pub fn export_map_pgm(map: &RealImage, lo: f64, hi: f64, path: &Path) -> Result<()> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidArgument(format!("window [{lo}, {hi}] is empty")));
    }
    let mut out = format!("P5\n{} {}\n65535\n", map.width(), map.height()).into_bytes();
    for &v in map.as_slice() {
        let level = if v.is_finite() {
            let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
            (t * 65535.0 + 0.5).floor() as u16
        } else {
            0
        };
        out.extend_from_slice(&level.to_be_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}
