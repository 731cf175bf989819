use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::RealImage;
use crate::maskgen::Mask;
use crate::phantom::PhantomMap;
use crate::pipeline::{QuantMaps, MAP_NAMES};
use crate::waterfat::GAMMA;

/// Error statistics of one estimated map against the truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapStats {
    pub name: String,
    /// Pixels compared.
    pub n: usize,
    /// Mean of estimate minus truth.
    pub bias: f64,
    pub rmse: f64,
    /// Largest |estimate - truth| / |truth| over pixels with nonzero truth.
    pub max_rel_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub maps: Vec<MapStats>,
    /// Maps with no pixel that is both masked and valid.
    pub no_pixels: Vec<String>,
}

/// Ground truth laid out like the estimated maps. `t1_over_m0` is NaN where
/// the phantom holds no signal.
pub fn truth_maps(phantom: &PhantomMap) -> BTreeMap<String, RealImage> {
    let p = phantom.params();
    let mut out = BTreeMap::new();
    for name in MAP_NAMES {
        let img = p.map(|t| match name {
            "b1" => t.b1_scale,
            "t2" => t.t2,
            "t2s_water" => t.t2s_water,
            "t2s_fat" => t.t2s_fat,
            "d_omega0" => t.d_omega0,
            "delta_b0" => t.d_omega0 / GAMMA,
            "fat_fraction" => t.fat_fraction(),
            "t1" => t.t1,
            "m0" => t.m0(),
            "t1_over_m0" if t.m0() > 0.0 => t.t1 / t.m0(),
            _ => f64::NAN,
        });
        out.insert(name.to_string(), img);
    }
    out
}

/// Compares every map over pixels inside `mask` whose estimate is valid and
/// whose truth is finite.
pub fn compare_maps(est: &QuantMaps, truth: &PhantomMap, mask: &Mask) -> Result<CompareReport> {
    if !mask.same_shape(&est.mask) || truth.width() != est.width() || truth.height() != est.height() {
        return Err(Error::DimensionMismatch("estimate, truth and mask sizes differ".into()));
    }
    let truths = truth_maps(truth);
    let mut report = CompareReport {
        maps: Vec::new(),
        no_pixels: Vec::new(),
    };
    for name in MAP_NAMES {
        let m = est.get(name)?;
        let t = &truths[name];
        let (mut n, mut sum, mut sq) = (0usize, 0.0, 0.0);
        let mut max_rel: Option<f64> = None;
        for i in 0..mask.len() {
            let (e, tv) = (m.values.as_slice()[i], t.as_slice()[i]);
            if !mask.as_slice()[i] || !m.valid.as_slice()[i] || !e.is_finite() || !tv.is_finite() {
                continue;
            }
            let d = e - tv;
            n += 1;
            sum += d;
            sq += d * d;
            if tv != 0.0 {
                let r = (d / tv).abs();
                max_rel = Some(max_rel.map_or(r, |m| m.max(r)));
            }
        }
        if n == 0 {
            report.no_pixels.push(name.to_string());
            continue;
        }
        report.maps.push(MapStats {
            name: name.to_string(),
            n,
            bias: sum / n as f64,
            rmse: (sq / n as f64).sqrt(),
            max_rel_error: max_rel,
        });
    }
    Ok(report)
}

impl CompareReport {
    pub fn stats(&self, name: &str) -> Option<&MapStats> {
        self.maps.iter().find(|s| s.name == name)
    }

    pub fn to_table(&self) -> String {
        let mut s = format!("{:<14} {:>7} {:>13} {:>13} {:>11}\n", "map", "n", "bias", "rmse", "max_rel");
        for m in &self.maps {
            let rel = m.max_rel_error.map_or("-".to_string(), |r| format!("{r:.3e}"));
            let _ = writeln!(s, "{:<14} {:>7} {:>13.5e} {:>13.5e} {:>11}", m.name, m.n, m.bias, m.rmse, rel);
        }
        for name in &self.no_pixels {
            let _ = writeln!(s, "{name:<14} {:>7} (no pixels)", 0);
        }
        s
    }
}
