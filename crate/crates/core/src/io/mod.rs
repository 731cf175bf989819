//! On-disk formats: JSON manifests with checksummed raw payloads, PBM masks,
//! PGM exports, the scan configuration and the map comparison report.

mod compare;
mod config;
mod images;
mod lut;
mod maps;
mod netpbm;

pub use compare::{compare_maps, truth_maps, CompareReport, MapStats};
pub use config::{Config, PhantomConfig, ScanSection, TimingConfig};
pub use images::{read_imageset, write_imageset, ImageManifest, ImageEntry};
pub use lut::{read_lut, write_lut, LutFile};
pub use maps::{read_quantmaps, write_quantmaps, MapEntry, MapsManifest, MAP_UNITS};
pub use netpbm::{export_map_pgm, read_mask, write_mask, MaskSidecar};

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const BYTE_ORDER: &str = "little-endian";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hashes `bytes`, then writes them to `dir/name`.
fn write_payload(dir: &Path, name: &str, bytes: &[u8]) -> Result<String> {
    let sum = sha256_hex(bytes);
    fs::write(dir.join(name), bytes)?;
    Ok(sum)
}

fn read_payload(dir: &Path, name: &str, sha256: &str, expected_len: usize) -> Result<Vec<u8>> {
    if name.contains('/') || name.contains('\\') || name == ".." {
        return Err(Error::Validation(format!("payload name {name} escapes the directory")));
    }
    let path = dir.join(name);
    let bytes = match fs::read(&path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(Error::NotFound { path }),
        Err(e) => return Err(e.into()),
    };
    if bytes.len() != expected_len {
        return Err(Error::DimensionMismatch(format!(
            "payload {name} has {} bytes, expected {expected_len}",
            bytes.len()
        )));
    }
    if sha256_hex(&bytes) != sha256 {
        return Err(Error::Checksum { file: name.to_string() });
    }
    Ok(bytes)
}

fn read_manifest<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::NotFound { path: path.to_path_buf() })
        }
        Err(e) => return Err(e.into()),
    };
    // check the version before the full schema so old files report the right error
    let raw: serde_json::Value = serde_json::from_str(&text)?;
    let found = raw
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Validation("manifest has no format_version".into()))?;
    if found != FORMAT_VERSION as u64 {
        return Err(Error::Version {
            found: found as u32,
            expected: FORMAT_VERSION,
        });
    }
    Ok(serde_json::from_value(raw)?)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    match fs::read_to_string(path) {
        Ok(t) => Ok(serde_json::from_str(&t)?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::NotFound { path: path.to_path_buf() }),
        Err(e) => Err(e.into()),
    }
}

pub fn save_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    write_json(path, value)
}
