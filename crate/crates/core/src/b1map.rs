//! Step 1: B1 scale from the ratio of the two segments' I8 images.

use num_complex::Complex32;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bloch::{slice_profile, RfPulse};
use crate::error::{Error, Result};
use crate::image::{Grid, RealImage};
use crate::maskgen::{mean_image, Mask};
use crate::seqsim::ImageSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioTable {
    pub k_samples: Vec<f64>,
    /// `|int Mxy(2 alpha)| / |int Mxy(alpha)|` from unit `Mz`.
    pub ratios: Vec<f64>,
}

/// `0.2, 0.202, ..., 1.8`.
pub fn default_k_grid() -> Vec<f64> {
    (0..=800).map(|i| 0.2 + 0.002 * i as f64).collect()
}

/// Longest run of strictly increasing or strictly decreasing values, as `start..end`.
fn longest_monotone_run(v: &[f64]) -> (usize, usize) {
    let mut best = (0, v.len().min(1));
    for dir in [1.0, -1.0] {
        let mut start = 0;
        for i in 1..=v.len() {
            if i == v.len() || !((v[i] - v[i - 1]) * dir > 0.0) {
                if i - start > best.1 - best.0 {
                    best = (start, i);
                }
                start = i;
            }
        }
    }
    best
}

pub fn build_ratio_table(pulse60: &RfPulse, pulse120: &RfPulse, k_grid: &[f64], z: &[f64]) -> Result<RatioTable> {
    if k_grid.len() < 2 || k_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("k grid must have at least two increasing values".into()));
    }
    let ratios: Vec<f64> = k_grid
        .par_iter()
        .map(|&k| {
            let a = slice_profile(pulse60, k, z)?.integrated_unit_response().norm();
            let b = slice_profile(pulse120, k, z)?.integrated_unit_response().norm();
            Ok(b / a)
        })
        .collect::<Result<_>>()?;
    let finite: Vec<f64> = ratios.iter().map(|r| if r.is_finite() { *r } else { f64::NAN }).collect();
    let (s, e) = longest_monotone_run(&finite);
    if e - s < 2 {
        return Err(Error::Numerical("ratio table is not monotone anywhere".into()));
    }
    Ok(RatioTable {
        k_samples: k_grid[s..e].to_vec(),
        ratios: finite[s..e].to_vec(),
    })
}

impl RatioTable {
    pub fn validate(&self) -> Result<()> {
        let n = self.k_samples.len();
        if n < 2 || self.ratios.len() != n {
            return Err(Error::Validation("ratio table needs matching k and ratio columns".into()));
        }
        let (s, e) = longest_monotone_run(&self.ratios);
        if e - s != n || self.k_samples.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Validation("ratio table is not strictly monotone".into()));
        }
        Ok(())
    }

    /// Reverse lookup with linear interpolation. The flag is set when the ratio
    /// lies outside the table and was clamped to an endpoint.
    pub fn invert(&self, ratio: f64) -> (f64, bool) {
        let r = &self.ratios;
        let n = r.len();
        let decreasing = r[n - 1] < r[0];
        // position in an increasing view
        let key = |i: usize| if decreasing { -r[i] } else { r[i] };
        let q = if decreasing { -ratio } else { ratio };
        if q <= key(0) {
            return (self.k_samples[0], q < key(0));
        }
        if q >= key(n - 1) {
            return (self.k_samples[n - 1], q > key(n - 1));
        }
        let (mut lo, mut hi) = (0, n - 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if key(mid) <= q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = (q - key(lo)) / (key(hi) - key(lo));
        (self.k_samples[lo] + t * (self.k_samples[hi] - self.k_samples[lo]), false)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct B1Map {
    /// Zero outside the mask and at invalid pixels.
    pub k: RealImage,
    pub valid: Grid<bool>,
    /// Ratio fell outside the table and was clamped.
    pub clamped: Grid<bool>,
}

pub fn estimate_b1(
    i8_seg1: &Grid<Complex32>,
    i8_seg2: &Grid<Complex32>,
    mask: &Mask,
    table: &RatioTable,
) -> Result<B1Map> {
    if !i8_seg1.same_shape(i8_seg2) || !i8_seg1.same_shape(mask) {
        return Err(Error::DimensionMismatch("I8 images and mask differ in size".into()));
    }
    table.validate()?;
    let (w, h) = (mask.width(), mask.height());
    let mut k = Grid::filled(w, h, 0.0);
    let mut valid = Grid::filled(w, h, false);
    let mut clamped = Grid::filled(w, h, false);
    for i in 0..mask.len() {
        if !mask.as_slice()[i] {
            continue;
        }
        let a = i8_seg1.as_slice()[i].norm() as f64;
        let b = i8_seg2.as_slice()[i].norm() as f64;
        if !(a > 0.0) || !b.is_finite() {
            continue;
        }
        let (kv, c) = table.invert(b / a);
        k.as_mut_slice()[i] = kv;
        valid.as_mut_slice()[i] = true;
        clamped.as_mut_slice()[i] = c;
    }
    Ok(B1Map { k, valid, clamped })
}

/// Mean magnitude image normalized by the segment-1 imaging sine factor
/// `sin(k * flip) / sin(flip)`. Reference image only; zero off the mask.
pub fn b1_corrected_mean(images: &ImageSet, kmap: &RealImage, mask: &Mask) -> Result<RealImage> {
    let mean = mean_image(images);
    if !mean.same_shape(kmap) || !mean.same_shape(mask) {
        return Err(Error::DimensionMismatch("k map and mask must match the images".into()));
    }
    let flip = images.timing.flip_imaging[0];
    let nominal = flip.sin();
    let data = (0..mean.len())
        .map(|i| {
            let s = (kmap.as_slice()[i] * flip).sin();
            if mask.as_slice()[i] && s > 0.0 {
                mean.as_slice()[i] * nominal / s
            } else {
                0.0
            }
        })
        .collect();
    Grid::from_vec(mean.width(), mean.height(), data)
}
