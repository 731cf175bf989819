use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_manifest, read_payload, write_json, write_payload, BYTE_ORDER, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::image::Grid;
use crate::pipeline::{QuantMap, QuantMaps, MAP_NAMES};

pub const MANIFEST: &str = "maps.json";
const VALUE_ENCODING: &str = "float64, row-major, origin top-left";
const FLAG_ENCODING: &str = "uint8, row-major, origin top-left";

pub const MAP_UNITS: [(&str, &str); 10] = [
    ("b1", "dimensionless"),
    ("t2", "s"),
    ("t2s_water", "s"),
    ("t2s_fat", "s"),
    ("d_omega0", "rad/s"),
    ("delta_b0", "T"),
    ("fat_fraction", "dimensionless"),
    ("t1", "s"),
    ("m0", "signal units"),
    ("t1_over_m0", "s per signal unit"),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapEntry {
    pub name: String,
    pub unit: String,
    pub file: String,
    pub sha256: String,
    pub valid_file: String,
    pub valid_sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapsManifest {
    pub format_version: u32,
    pub width: usize,
    pub height: usize,
    pub value_encoding: String,
    pub flag_encoding: String,
    pub byte_order: String,
    pub mask_file: String,
    pub mask_sha256: String,
    /// Bit 1: B1 ratio clamped, 2: T2 at bound, 4: T1 at bound, 8: no off-resonance guess.
    pub warnings_file: String,
    pub warnings_sha256: String,
    pub maps: Vec<MapEntry>,
}

fn flags_bytes(g: &Grid<bool>) -> Vec<u8> {
    g.as_slice().iter().map(|&b| b as u8).collect()
}

fn bytes_flags(w: usize, h: usize, bytes: Vec<u8>) -> Result<Grid<bool>> {
    if bytes.iter().any(|&b| b > 1) {
        return Err(Error::Validation("flag payload holds values other than 0 and 1".into()));
    }
    Grid::from_vec(w, h, bytes.into_iter().map(|b| b == 1).collect())
}

pub fn write_quantmaps(maps: &QuantMaps, dir: &Path) -> Result<()> {
    maps.validate()?;
    fs::create_dir_all(dir)?;
    let mask_sha256 = write_payload(dir, "mask.u8", &flags_bytes(&maps.mask))?;
    let warnings_sha256 = write_payload(dir, "warnings.u8", maps.warnings.as_slice())?;
    let mut entries = Vec::new();
    for (name, unit) in MAP_UNITS {
        let m = maps.get(name)?;
        let bytes: Vec<u8> = m.values.as_slice().iter().flat_map(|v| v.to_le_bytes()).collect();
        let file = format!("{name}.f64");
        let valid_file = format!("{name}.valid.u8");
        let sha256 = write_payload(dir, &file, &bytes)?;
        let valid_sha256 = write_payload(dir, &valid_file, &flags_bytes(&m.valid))?;
        entries.push(MapEntry {
            name: name.into(),
            unit: unit.into(),
            file,
            sha256,
            valid_file,
            valid_sha256,
        });
    }
    let manifest = MapsManifest {
        format_version: FORMAT_VERSION,
        width: maps.width(),
        height: maps.height(),
        value_encoding: VALUE_ENCODING.into(),
        flag_encoding: FLAG_ENCODING.into(),
        byte_order: BYTE_ORDER.into(),
        mask_file: "mask.u8".into(),
        mask_sha256,
        warnings_file: "warnings.u8".into(),
        warnings_sha256,
        maps: entries,
    };
    write_json(&dir.join(MANIFEST), &manifest)
}

pub fn read_quantmaps(dir: &Path) -> Result<QuantMaps> {
    let m: MapsManifest = read_manifest(&dir.join(MANIFEST))?;
    if m.byte_order != BYTE_ORDER || m.value_encoding != VALUE_ENCODING || m.flag_encoding != FLAG_ENCODING {
        return Err(Error::Validation("unsupported map encoding".into()));
    }
    if m.maps.len() != MAP_NAMES.len() {
        return Err(Error::Validation(format!(
            "manifest lists {} maps, expected {}",
            m.maps.len(),
            MAP_NAMES.len()
        )));
    }
    let (w, h) = (m.width, m.height);
    let mask = bytes_flags(w, h, read_payload(dir, &m.mask_file, &m.mask_sha256, w * h)?)?;
    let warnings = Grid::from_vec(w, h, read_payload(dir, &m.warnings_file, &m.warnings_sha256, w * h)?)?;
    let mut out = BTreeMap::new();
    for e in &m.maps {
        if !MAP_NAMES.contains(&e.name.as_str()) || out.contains_key(&e.name) {
            return Err(Error::Validation(format!("unexpected or repeated map {}", e.name)));
        }
        let bytes = read_payload(dir, &e.file, &e.sha256, w * h * 8)?;
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let valid = bytes_flags(w, h, read_payload(dir, &e.valid_file, &e.valid_sha256, w * h)?)?;
        out.insert(
            e.name.clone(),
            QuantMap {
                values: Grid::from_vec(w, h, values)?,
                valid,
            },
        );
    }
    let maps = QuantMaps {
        mask,
        maps: out,
        warnings,
    };
    maps.validate()?;
    Ok(maps)
}
