use std::fs;
use std::path::Path;

use num_complex::Complex32;
use serde::{Deserialize, Serialize};

use super::{read_manifest, read_payload, write_json, write_payload, BYTE_ORDER, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::image::Grid;
use crate::seqsim::{ImageSet, SequenceTiming, IMAGES_PER_SEGMENT};

pub const MANIFEST: &str = "manifest.json";
const ENCODING: &str = "complex float32: real then imaginary, row-major, origin top-left";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub segment: usize,
    pub index: usize,
    pub file: String,
    /// Seconds after the saturation pulse.
    pub acq_time: f64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageManifest {
    pub format_version: u32,
    pub width: usize,
    pub height: usize,
    pub segments: usize,
    pub images_per_segment: usize,
    pub pixel_encoding: String,
    pub byte_order: String,
    pub noise_sigma: f64,
    pub timing: SequenceTiming,
    pub images: Vec<ImageEntry>,
}

fn payload_name(segment: usize, index: usize) -> String {
    format!("seg{segment}_i{index:02}.bin")
}

pub fn write_imageset(set: &ImageSet, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(set.images().len());
    for (n, img) in set.images().iter().enumerate() {
        let (segment, index) = (n / IMAGES_PER_SEGMENT + 1, n % IMAGES_PER_SEGMENT + 1);
        let mut bytes = Vec::with_capacity(img.len() * 8);
        for v in img.as_slice() {
            bytes.extend_from_slice(&v.re.to_le_bytes());
            bytes.extend_from_slice(&v.im.to_le_bytes());
        }
        let file = payload_name(segment, index);
        let sha256 = write_payload(dir, &file, &bytes)?;
        entries.push(ImageEntry {
            segment,
            index,
            file,
            acq_time: set.timing.acq_times[index - 1],
            sha256,
        });
    }
    let manifest = ImageManifest {
        format_version: FORMAT_VERSION,
        width: set.width(),
        height: set.height(),
        segments: 2,
        images_per_segment: IMAGES_PER_SEGMENT,
        pixel_encoding: ENCODING.into(),
        byte_order: BYTE_ORDER.into(),
        noise_sigma: set.noise_sigma,
        timing: set.timing.clone(),
        images: entries,
    };
    write_json(&dir.join(MANIFEST), &manifest)
}

pub fn read_imageset(dir: &Path) -> Result<ImageSet> {
    let m: ImageManifest = read_manifest(&dir.join(MANIFEST))?;
    if m.segments != 2 || m.images_per_segment != IMAGES_PER_SEGMENT {
        return Err(Error::Validation(format!(
            "manifest declares {} x {} images; expected 2 x {IMAGES_PER_SEGMENT}",
            m.segments, m.images_per_segment
        )));
    }
    if m.images.len() != m.segments * m.images_per_segment {
        return Err(Error::Validation(format!(
            "manifest lists {} payloads for {} images",
            m.images.len(),
            m.segments * m.images_per_segment
        )));
    }
    if m.byte_order != BYTE_ORDER || m.pixel_encoding != ENCODING {
        return Err(Error::Validation("unsupported pixel encoding or byte order".into()));
    }
    m.timing.validate()?;
    let mut slots: Vec<Option<Grid<Complex32>>> = vec![None; m.images.len()];
    for e in &m.images {
        if !(1..=2).contains(&e.segment) || !(1..=IMAGES_PER_SEGMENT).contains(&e.index) {
            return Err(Error::Validation(format!("no image I{} in segment {}", e.index, e.segment)));
        }
        let slot = (e.segment - 1) * IMAGES_PER_SEGMENT + e.index - 1;
        if slots[slot].is_some() {
            return Err(Error::Validation(format!("image I{} of segment {} listed twice", e.index, e.segment)));
        }
        let bytes = read_payload(dir, &e.file, &e.sha256, m.width * m.height * 8)?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| {
                Complex32::new(
                    f32::from_le_bytes([c[0], c[1], c[2], c[3]]),
                    f32::from_le_bytes([c[4], c[5], c[6], c[7]]),
                )
            })
            .collect();
        slots[slot] = Some(Grid::from_vec(m.width, m.height, data)?);
    }
    let images = slots.into_iter().map(|s| s.expect("every slot filled once")).collect();
    ImageSet::new(images, m.timing, m.noise_sigma)
}
