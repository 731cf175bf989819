//! Processing mask: threshold of the mean magnitude image, binary closing,
//! then erosion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Grid, RealImage};
use crate::seqsim::ImageSet;

pub type Mask = Grid<bool>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaskConfig {
    /// Fraction of the maximum of the mean image.
    pub threshold: f64,
    pub close_radius: usize,
    pub erode_radius: usize,
}

impl Default for MaskConfig {
    fn default() -> Self {
        Self {
            threshold: 0.1,
            close_radius: 2,
            erode_radius: 1,
        }
    }
}

/// Pixel-wise mean of the magnitudes of all 22 images.
pub fn mean_image(images: &ImageSet) -> RealImage {
    let n = images.images().len() as f64;
    let mut acc = Grid::filled(images.width(), images.height(), 0.0);
    for img in images.images() {
        for (a, v) in acc.as_mut_slice().iter_mut().zip(img.as_slice()) {
            *a += v.norm() as f64;
        }
    }
    acc.map(|v| v / n)
}

/// Offsets of the disc `dx^2 + dy^2 <= r^2`.
fn disc(radius: usize) -> Vec<(isize, isize)> {
    let r = radius as isize;
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                out.push((dx, dy));
            }
        }
    }
    out
}

fn offset(m: &Mask, x: usize, y: usize, d: (isize, isize)) -> Option<bool> {
    let xx = x as isize + d.0;
    let yy = y as isize + d.1;
    if xx < 0 || yy < 0 || xx >= m.width() as isize || yy >= m.height() as isize {
        None
    } else {
        Some(m[(xx as usize, yy as usize)])
    }
}

pub fn dilate(m: &Mask, radius: usize) -> Mask {
    let se = disc(radius);
    Grid::from_fn(m.width(), m.height(), |x, y| se.iter().any(|&d| offset(m, x, y, d) == Some(true)))
}

/// Pixels outside the image do not constrain the result.
pub fn erode(m: &Mask, radius: usize) -> Mask {
    let se = disc(radius);
    Grid::from_fn(m.width(), m.height(), |x, y| se.iter().all(|&d| offset(m, x, y, d) != Some(false)))
}

pub fn close(m: &Mask, radius: usize) -> Mask {
    erode(&dilate(m, radius), radius)
}

pub fn threshold_mask(mean: &RealImage, threshold: f64) -> Result<Mask> {
    if mean.is_empty() {
        return Err(Error::InvalidArgument("mean image is empty".into()));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!("threshold {threshold} is outside (0, 1)")));
    }
    let max = mean.as_slice().iter().copied().filter(|v| v.is_finite()).fold(0.0f64, f64::max);
    if max <= 0.0 {
        return Ok(mean.map(|_| false));
    }
    let level = threshold * max;
    Ok(mean.map(|&v| v > level))
}

pub fn make_mask(mean: &RealImage, cfg: &MaskConfig) -> Result<Mask> {
    let t = threshold_mask(mean, cfg.threshold)?;
    Ok(erode(&close(&t, cfg.close_radius), cfg.erode_radius))
}

pub fn count(m: &Mask) -> usize {
    m.as_slice().iter().filter(|&&b| b).count()
}
