//! The four estimation steps applied over a mask.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::b1map::{build_ratio_table, estimate_b1, RatioTable};
use crate::bloch::{Mat3, SliceProfile};
use crate::error::{Error, Result};
use crate::fitcore::SolverOptions;
use crate::image::{Grid, RealImage};
use crate::maskgen::Mask;
use crate::seqsim::{ImageSet, PulseSet, ProfileSet, RfConfig};
use crate::t1fit::{fit_t1_m0, recovery_transverse, residual_mz0, T1Config, T1Context};
use crate::t2fit::{fit_t2, EchoModelContext, T2Config};
use crate::waterfat::{delta_b0, WfConfig, WfSolver};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct B1Config {
    pub k_min: f64,
    pub k_max: f64,
    pub k_step: f64,
}

impl Default for B1Config {
    fn default() -> Self {
        Self {
            k_min: 0.2,
            k_max: 1.8,
            k_step: 0.002,
        }
    }
}

impl B1Config {
    pub fn k_grid(&self) -> Result<Vec<f64>> {
        if !(self.k_min > 0.0 && self.k_max > self.k_min && self.k_step > 0.0) {
            return Err(Error::Config("B1 grid needs 0 < k_min < k_max and a positive step".into()));
        }
        let n = ((self.k_max - self.k_min) / self.k_step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| self.k_min + self.k_step * i as f64).collect())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimateConfig {
    pub rf: RfConfig,
    pub b1: B1Config,
    pub t2: T2Config,
    pub wf: WfConfig,
    pub t1: T1Config,
}

/// One estimated quantity with a per-pixel validity flag.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantMap {
    pub values: RealImage,
    pub valid: Grid<bool>,
}

impl QuantMap {
    fn empty(w: usize, h: usize) -> Self {
        Self {
            values: Grid::filled(w, h, 0.0),
            valid: Grid::filled(w, h, false),
        }
    }
}

pub const WARN_B1_CLAMPED: u8 = 1;
pub const WARN_T2_AT_BOUND: u8 = 2;
pub const WARN_T1_AT_BOUND: u8 = 4;
pub const WARN_OFFRES_GUESS: u8 = 8;

pub const MAP_NAMES: [&str; 10] = [
    "b1",
    "t2",
    "t2s_water",
    "t2s_fat",
    "d_omega0",
    "delta_b0",
    "fat_fraction",
    "t1",
    "m0",
    "t1_over_m0",
];

/// Estimated maps in seconds, rad/s, tesla or dimensionless units, keyed by
/// [`MAP_NAMES`].
#[derive(Clone, Debug, PartialEq)]
pub struct QuantMaps {
    pub mask: Mask,
    pub maps: BTreeMap<String, QuantMap>,
    /// `WARN_*` bits per pixel.
    pub warnings: Grid<u8>,
}

impl QuantMaps {
    pub fn get(&self, name: &str) -> Result<&QuantMap> {
        self.maps
            .get(name)
            .ok_or_else(|| Error::InvalidArgument(format!("no map named {name}")))
    }

    pub fn width(&self) -> usize {
        self.mask.width()
    }

    pub fn height(&self) -> usize {
        self.mask.height()
    }

    pub fn validate(&self) -> Result<()> {
        for name in MAP_NAMES {
            let m = self.get(name)?;
            if !m.values.same_shape(&self.mask) || !m.valid.same_shape(&self.mask) {
                return Err(Error::DimensionMismatch(format!("map {name} does not match the mask")));
            }
        }
        if self.maps.len() != MAP_NAMES.len() || !self.warnings.same_shape(&self.mask) {
            return Err(Error::Validation("unexpected map set".into()));
        }
        Ok(())
    }
}

fn lerp_profile(a: &SliceProfile, b: &SliceProfile, t: f64) -> SliceProfile {
    let rotations = a
        .rotations
        .iter()
        .zip(&b.rotations)
        .map(|(ra, rb)| {
            let mut r: Mat3 = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    r[i][j] = ra[i][j] + t * (rb[i][j] - ra[i][j]);
                }
            }
            r
        })
        .collect();
    SliceProfile {
        z_samples: a.z_samples.clone(),
        rotations,
    }
}

/// Element-wise interpolation between two profile sets. The matrices are only
/// read through `Mz`-column and `R_zz` entries, which vary smoothly in `k`.
fn lerp_profiles(a: &ProfileSet, b: &ProfileSet, k: f64) -> ProfileSet {
    let t = if b.k > a.k { (k - a.k) / (b.k - a.k) } else { 0.0 };
    ProfileSet {
        k,
        sat: lerp_profile(&a.sat, &b.sat, t),
        probe: lerp_profile(&a.probe, &b.probe, t),
        imaging: [
            lerp_profile(&a.imaging[0], &b.imaging[0], t),
            lerp_profile(&a.imaging[1], &b.imaging[1], t),
        ],
        inversion: lerp_profile(&a.inversion, &b.inversion, t),
        inversion_theta: a
            .inversion_theta
            .iter()
            .zip(&b.inversion_theta)
            .map(|(x, y)| x + t * (y - x))
            .collect(),
    }
}

/// Profile sets on the nodes `k_min + i * step` that bracket the requested scales.
struct ProfileLattice {
    k_min: f64,
    step: f64,
    nodes: BTreeMap<usize, ProfileSet>,
}

impl ProfileLattice {
    fn new(pulses: &PulseSet, cfg: &B1Config, ks: impl Iterator<Item = f64>) -> Result<Self> {
        let mut idx: Vec<usize> = Vec::new();
        for k in ks {
            let i = ((k - cfg.k_min) / cfg.k_step).floor().max(0.0) as usize;
            idx.push(i);
            idx.push(i + 1);
        }
        idx.sort_unstable();
        idx.dedup();
        let sets: Vec<Result<ProfileSet>> = idx
            .par_iter()
            .map(|&i| pulses.profiles(cfg.k_min + cfg.k_step * i as f64))
            .collect();
        let nodes = idx.into_iter().zip(sets).map(|(i, s)| Ok((i, s?))).collect::<Result<_>>()?;
        Ok(Self {
            k_min: cfg.k_min,
            step: cfg.k_step,
            nodes,
        })
    }

    fn at(&self, k: f64) -> ProfileSet {
        let i = ((k - self.k_min) / self.step).floor().max(0.0) as usize;
        lerp_profiles(&self.nodes[&i], &self.nodes[&(i + 1)], k)
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct PixelResult {
    values: [f64; 10],
    valid: [bool; 10],
    warnings: u8,
}

/// Builds the B1 lookup table for the configured imaging pulses.
pub fn ratio_table(images: &ImageSet, cfg: &EstimateConfig) -> Result<RatioTable> {
    let pulses = cfg.rf.pulses(&images.timing)?;
    build_ratio_table(&pulses.imaging[0], &pulses.imaging[1], &cfg.b1.k_grid()?, &pulses.z)
}

fn magnitudes(v: &[Complex64]) -> [f64; 3] {
    [v[0].norm(), v[1].norm(), v[2].norm()]
}

fn estimate_pixel(
    px: &[[Complex64; 11]; 2],
    k: f64,
    profiles: &ProfileSet,
    images: &ImageSet,
    cfg: &EstimateConfig,
    wf: &WfSolver,
) -> PixelResult {
    let timing = &images.timing;
    let mut r = PixelResult::default();
    r.values[0] = k;
    r.valid[0] = true;

    let echo_times = timing.echo_times();
    let echoes = [magnitudes(&px[0][8..]), magnitudes(&px[1][8..])];
    let contexts = EchoModelContext::from_profiles(&profiles.imaging[0], &profiles.inversion, echo_times, k)
        .and_then(|c1| Ok([c1, EchoModelContext::from_profiles(&profiles.imaging[1], &profiles.inversion, echo_times, k)?]));
    let set_t2 = |r: &mut PixelResult, ctx: &[EchoModelContext; 2]| {
        if let Ok(f) = fit_t2(&echoes[0], &echoes[1], [&ctx[0], &ctx[1]], &cfg.t2) {
            r.values[1] = f.t2;
            r.valid[1] = true;
            r.warnings &= !WARN_T2_AT_BOUND;
            if f.at_bound {
                r.warnings |= WARN_T2_AT_BOUND;
            }
        }
    };
    if let Ok(ctx) = &contexts {
        set_t2(&mut r, ctx);
    }

    let data = [px[0][0], px[0][1], px[0][2], px[0][3], px[0][4]];
    let Ok(e) = wf.fit(&data) else {
        return r;
    };
    let Ok(db0) = delta_b0(e.d_omega0, cfg.wf.gamma) else {
        return r;
    };
    r.values[2..7].copy_from_slice(&[e.t2s_water, e.t2s_fat, e.d_omega0, db0, e.fat_fraction]);
    r.valid[2..7].copy_from_slice(&[true; 5]);
    if e.low_confidence {
        r.warnings |= WARN_OFFRES_GUESS;
    }

    // Step 3 amplitudes carry the saturation pulse's slice factor
    let s_sat = profiles.sat.integrated_unit_response().norm();
    let total = e.w.norm() + e.f.norm();
    if !(s_sat > 0.0 && total > 0.0) {
        return r;
    }
    let te = timing.recovery_echo_times();
    let mut echo_weight = [0.0; 3];
    for (w, &t) in echo_weight.iter_mut().zip(&te) {
        let water = e.w * (-t / e.t2s_water).exp();
        let fat = e.f * Complex64::from_polar((-t / e.t2s_fat).exp(), cfg.wf.omega_cs * t);
        *w = (water + fat).norm() / total;
    }
    let Ok(mz0) = residual_mz0(e.w.norm() / s_sat, e.f.norm() / s_sat, k, cfg.t1.sat_flip) else {
        return r;
    };
    let t1 = T1Context::new(
        profiles.probe.clone(),
        profiles.imaging[0].clone(),
        timing.recovery_pulse_times(),
        mz0,
    )
    .and_then(|mut ctx| {
        ctx.echo_weight = echo_weight;
        ctx.t1_bounds = (cfg.t1.t1_min, cfg.t1.t1_max);
        let opts = SolverOptions {
            max_iter: cfg.t1.max_iter,
            tol: cfg.t1.tol,
        };
        fit_t1_m0(&magnitudes(&px[0][5..8]), &ctx, &cfg.t1.starts, opts)
    });
    let Ok(f) = t1 else {
        return r;
    };
    r.values[7..10].copy_from_slice(&[f.t1, f.m0, f.t1_over_m0]);
    r.valid[7..10].copy_from_slice(&[true; 3]);
    if f.at_bound {
        r.warnings |= WARN_T1_AT_BOUND;
    }

    // refit T2 against the transverse profile left by the fitted recovery
    if let Ok(mut ctx) = contexts {
        let times = timing.recovery_pulse_times();
        for (seg, c) in ctx.iter_mut().enumerate() {
            let mxy = recovery_transverse(
                f.t1,
                f.m0,
                mz0,
                [
                    (times[0], &profiles.probe),
                    (times[1], &profiles.probe),
                    (times[2], &profiles.imaging[seg]),
                ],
            );
            c.weight_z = mxy[2].iter().map(|m| m.norm()).collect();
        }
        set_t2(&mut r, &ctx);
    }
    r
}

/// Runs Steps 1-4 on every masked pixel. A prebuilt `table` skips the B1 table build.
pub fn estimate(images: &ImageSet, mask: &Mask, cfg: &EstimateConfig, table: Option<&RatioTable>) -> Result<QuantMaps> {
    let (w, h) = (images.width(), images.height());
    if mask.width() != w || mask.height() != h {
        return Err(Error::DimensionMismatch("mask does not match the images".into()));
    }
    images.timing.validate()?;
    cfg.rf.validate()?;
    let built;
    let table = match table {
        Some(t) => t,
        None => {
            built = ratio_table(images, cfg)?;
            &built
        }
    };
    let b1 = estimate_b1(images.image(1, 8)?, images.image(2, 8)?, mask, table)?;
    let wf_cfg = cfg.wf.clone().with_times(&images.timing);
    let wf = WfSolver::new(&wf_cfg)?;
    let run_cfg = EstimateConfig {
        wf: wf_cfg,
        ..cfg.clone()
    };

    let pulses = cfg.rf.pulses(&images.timing)?;
    let pixels: Vec<usize> = (0..w * h).filter(|&i| b1.valid.as_slice()[i]).collect();
    let lattice = ProfileLattice::new(&pulses, &cfg.b1, pixels.iter().map(|&i| b1.k.as_slice()[i]))?;

    let results: Vec<PixelResult> = pixels
        .par_iter()
        .map(|&i| {
            let k = b1.k.as_slice()[i];
            let px = images.pixel(i % w, i / w)?;
            let profiles = lattice.at(k);
            let mut r = estimate_pixel(&px, k, &profiles, images, &run_cfg, &wf);
            if b1.clamped.as_slice()[i] {
                r.warnings |= WARN_B1_CLAMPED;
            }
            Ok(r)
        })
        .collect::<Result<_>>()?;

    let mut maps: Vec<QuantMap> = (0..MAP_NAMES.len()).map(|_| QuantMap::empty(w, h)).collect();
    let mut warnings = Grid::filled(w, h, 0u8);
    for (&i, r) in pixels.iter().zip(&results) {
        for (n, m) in maps.iter_mut().enumerate() {
            if r.valid[n] {
                m.values.as_mut_slice()[i] = r.values[n];
                m.valid.as_mut_slice()[i] = true;
            }
        }
        warnings.as_mut_slice()[i] = r.warnings;
    }
    Ok(QuantMaps {
        mask: mask.clone(),
        maps: MAP_NAMES.iter().map(|s| s.to_string()).zip(maps).collect(),
        warnings,
    })
}
