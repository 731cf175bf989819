//! Forward simulation of the two-segment multiMap acquisition.
//!
//! Image index `m` (1-based) of a segment is stored at `[m - 1]`:
//! I1..I5 sample the FID left by the saturation pulse, I6/I7 follow the two
//! probes, I8 follows the imaging pulse and I9..I11 are spin echoes.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_6, PI};

use num_complex::{Complex32, Complex64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bloch::{integrate_slice, nutation_angle, slice_profile, z_grid, RfPulse, SincShape, SliceProfile};
use crate::error::{Error, Result};
use crate::image::Grid;
use crate::phantom::{PhantomMap, TissueParams};
use crate::t1fit::{recovery_transverse, residual_mz0};
use crate::t2fit::simulate_echoes;

/// Fat chemical shift relative to water at 1.5 T (rad/s).
pub const OMEGA_FAT: f64 = -2.0 * PI * 217.0;

pub const IMAGES_PER_SEGMENT: usize = 11;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceTiming {
    pub tr: f64,
    pub t_sat: f64,
    /// Acquisition centers I1..I11, seconds after the saturation pulse.
    pub acq_times: [f64; 11],
    pub probe_times: [f64; 2],
    pub inversion_times: [f64; 3],
    pub flip_sat: f64,
    pub flip_probe: f64,
    /// Imaging flip of segment 1 and segment 2.
    pub flip_imaging: [f64; 2],
    pub flip_inversion: f64,
}

impl Default for SequenceTiming {
    fn default() -> Self {
        Self::with_t_sat(1.2)
    }
}

impl SequenceTiming {
    /// Default layout scaled to a saturation recovery time `t_sat`, with `TR = 2 t_sat`.
    pub fn with_t_sat(t_sat: f64) -> Self {
        let (p1, p2) = (t_sat / 3.0, 2.0 * t_sat / 3.0);
        let te = 2e-3;
        Self {
            tr: 2.0 * t_sat,
            t_sat,
            acq_times: [
                2e-3,
                4e-3,
                6e-3,
                8e-3,
                10e-3,
                p1 + te,
                p2 + te,
                t_sat + te,
                t_sat + 12e-3,
                t_sat + 24e-3,
                t_sat + 40e-3,
            ],
            probe_times: [p1, p2],
            inversion_times: [t_sat + 6e-3, t_sat + 18e-3, t_sat + 32e-3],
            flip_sat: FRAC_PI_2,
            flip_probe: FRAC_PI_6,
            flip_imaging: [FRAC_PI_3, 2.0 * FRAC_PI_3],
            flip_inversion: PI,
        }
    }

    pub fn imaging_time(&self) -> f64 {
        self.t_sat
    }

    /// Spin-echo times I9..I11 measured from the imaging pulse.
    pub fn echo_times(&self) -> [f64; 3] {
        [8, 9, 10].map(|i| self.acq_times[i] - self.t_sat)
    }

    /// Times of the probes and the imaging pulse.
    pub fn recovery_pulse_times(&self) -> [f64; 3] {
        [self.probe_times[0], self.probe_times[1], self.t_sat]
    }

    /// Delay from each recovery pulse to its acquisition (I6, I7, I8).
    pub fn recovery_echo_times(&self) -> [f64; 3] {
        let p = self.recovery_pulse_times();
        [self.acq_times[5] - p[0], self.acq_times[6] - p[1], self.acq_times[7] - p[2]]
    }

    pub fn validate(&self) -> Result<()> {
        let a = &self.acq_times;
        let all = [
            self.tr,
            self.t_sat,
            self.flip_sat,
            self.flip_probe,
            self.flip_imaging[0],
            self.flip_imaging[1],
            self.flip_inversion,
        ];
        if all.iter().chain(a).chain(&self.probe_times).chain(&self.inversion_times).any(|v| !v.is_finite()) {
            return Err(Error::Validation("timing values must be finite".into()));
        }
        if !(a[0] > 0.0) || a.windows(2).any(|w| !(w[1] > w[0])) || !(a[10] < self.tr) {
            return Err(Error::Validation("acquisition times must satisfy 0 < t1 < ... < t11 < TR".into()));
        }
        let [p1, p2] = self.probe_times;
        let [v1, v2, v3] = self.inversion_times;
        let order = [
            a[4], p1, a[5], p2, a[6], self.t_sat, a[7], v1, a[8], v2, a[9], v3, a[10],
        ];
        if order.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Validation("pulses do not interleave the acquisitions".into()));
        }
        let mut reference = self.t_sat;
        for (n, &inv) in self.inversion_times.iter().enumerate() {
            let echo = 2.0 * inv - reference;
            if (echo - a[8 + n]).abs() > 1e-9 {
                return Err(Error::Validation(format!(
                    "acquisition {} at {} s is not at the spin echo ({} s)",
                    9 + n,
                    a[8 + n],
                    echo
                )));
            }
            reference = echo;
        }
        if !(self.flip_sat > 0.0 && self.flip_sat <= FRAC_PI_2) {
            return Err(Error::Validation("saturation flip must lie in (0, pi/2]".into()));
        }
        if [self.flip_probe, self.flip_imaging[0], self.flip_imaging[1], self.flip_inversion]
            .iter()
            .any(|f| !(*f > 0.0))
        {
            return Err(Error::Validation("flip angles must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PulseKind {
    Sinc,
    Hard,
}

/// RF pulse shape and slice sampling shared by all pulses of the sequence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RfConfig {
    pub kind: PulseKind,
    pub duration: f64,
    pub time_bandwidth: f64,
    pub pieces: usize,
    pub slice_thickness: f64,
    pub z_samples: usize,
    /// Half-width of the simulated z range, in slice thicknesses.
    pub z_extent: f64,
}

impl Default for RfConfig {
    fn default() -> Self {
        let s = SincShape::default();
        Self {
            kind: PulseKind::Sinc,
            duration: s.duration,
            time_bandwidth: s.time_bandwidth,
            pieces: s.pieces,
            slice_thickness: s.slice_thickness,
            z_samples: 129,
            z_extent: 2.0,
        }
    }
}

impl RfConfig {
    pub fn hard() -> Self {
        Self {
            kind: PulseKind::Hard,
            z_samples: 2,
            ..Self::default()
        }
    }

    pub fn z(&self) -> Vec<f64> {
        z_grid(self.z_extent * self.slice_thickness, self.z_samples)
    }

    fn shape(&self) -> SincShape {
        SincShape {
            duration: self.duration,
            time_bandwidth: self.time_bandwidth,
            pieces: self.pieces,
            slice_thickness: self.slice_thickness,
        }
    }

    /// Excitation pulses tip `+z` toward `+x`; inversions play along `x`.
    pub fn pulse(&self, flip: f64, excitation: bool) -> Result<RfPulse> {
        let phase = if excitation { -FRAC_PI_2 } else { 0.0 };
        match self.kind {
            PulseKind::Hard => {
                if !(self.duration > 0.0) {
                    return Err(Error::InvalidArgument("pulse duration must be positive".into()));
                }
                Ok(RfPulse::hard(flip, phase, self.duration))
            }
            PulseKind::Sinc => RfPulse::windowed_sinc(flip, phase, &self.shape(), !excitation),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.z_samples < 2 {
            return Err(Error::Validation("need at least two z samples".into()));
        }
        if !(self.z_extent > 0.0 && self.slice_thickness > 0.0 && self.duration > 0.0) {
            return Err(Error::Validation("rf extents must be positive".into()));
        }
        if self.kind == PulseKind::Sinc && (self.pieces == 0 || !(self.time_bandwidth > 0.0)) {
            return Err(Error::Validation("sinc pulses need pieces and a positive time-bandwidth".into()));
        }
        Ok(())
    }

    pub fn pulses(&self, timing: &SequenceTiming) -> Result<PulseSet> {
        Ok(PulseSet {
            sat: self.pulse(timing.flip_sat, true)?,
            probe: self.pulse(timing.flip_probe, true)?,
            imaging: [
                self.pulse(timing.flip_imaging[0], true)?,
                self.pulse(timing.flip_imaging[1], true)?,
            ],
            inversion: self.pulse(timing.flip_inversion, false)?,
            z: self.z(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PulseSet {
    pub sat: RfPulse,
    pub probe: RfPulse,
    pub imaging: [RfPulse; 2],
    pub inversion: RfPulse,
    pub z: Vec<f64>,
}

impl PulseSet {
    pub fn profiles(&self, k: f64) -> Result<ProfileSet> {
        let inversion = slice_profile(&self.inversion, k, &self.z)?;
        Ok(ProfileSet {
            k,
            sat: slice_profile(&self.sat, k, &self.z)?,
            probe: slice_profile(&self.probe, k, &self.z)?,
            imaging: [
                slice_profile(&self.imaging[0], k, &self.z)?,
                slice_profile(&self.imaging[1], k, &self.z)?,
            ],
            inversion_theta: inversion.rotations.iter().map(nutation_angle).collect(),
            inversion,
        })
    }
}

/// Slice profiles of every pulse at one B1 scale.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileSet {
    pub k: f64,
    pub sat: SliceProfile,
    pub probe: SliceProfile,
    pub imaging: [SliceProfile; 2],
    pub inversion: SliceProfile,
    pub inversion_theta: Vec<f64>,
}

impl ProfileSet {
    fn check(&self, k: f64) -> Result<()> {
        let z = &self.sat.z_samples;
        let same = [&self.probe, &self.imaging[0], &self.imaging[1], &self.inversion]
            .iter()
            .all(|p| &p.z_samples == z && p.rotations.len() == z.len())
            && self.inversion_theta.len() == z.len();
        if !same {
            return Err(Error::InvalidArgument("profile set mixes z grids".into()));
        }
        if (self.k - k).abs() > 1e-12 * k.abs().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "profiles computed at k = {} but the pixel has k = {}",
                self.k, k
            )));
        }
        Ok(())
    }
}

/// Two-species FID at time `t` after excitation, normalized to unit `W + F`.
pub fn species_kernel(p: &TissueParams, t: f64, omega_fat: f64) -> Complex64 {
    let m0 = p.m0();
    if m0 == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let water = p.water_amp * (-t / p.t2s_water).exp();
    let fat = Complex64::from_polar(p.fat_amp * (-t / p.t2s_fat).exp(), omega_fat * t);
    Complex64::from_polar(1.0, p.d_omega0 * t) * (water + fat) / m0
}

/// Noiseless values of both segments for one voxel.
pub fn simulate_pixel(
    p: &TissueParams,
    timing: &SequenceTiming,
    profiles: &ProfileSet,
    omega_fat: f64,
) -> Result<[[Complex64; IMAGES_PER_SEGMENT]; 2]> {
    profiles.check(p.b1_scale)?;
    let zero = Complex64::new(0.0, 0.0);
    let mut out = [[zero; IMAGES_PER_SEGMENT]; 2];
    let m0 = p.m0();
    if m0 == 0.0 {
        return Ok(out);
    }
    let z = &profiles.sat.z_samples;
    let s_sat = profiles.sat.integrated_unit_response();
    for m in 0..5 {
        let v = s_sat * m0 * species_kernel(p, timing.acq_times[m], omega_fat);
        out[0][m] = v;
        out[1][m] = v;
    }
    let mz0 = residual_mz0(p.water_amp, p.fat_amp, p.b1_scale, timing.flip_sat)?;
    let times = timing.recovery_pulse_times();
    let te = timing.recovery_echo_times();
    for seg in 0..2 {
        let mxy = recovery_transverse(
            p.t1,
            m0,
            mz0,
            [
                (times[0], &profiles.probe),
                (times[1], &profiles.probe),
                (times[2], &profiles.imaging[seg]),
            ],
        );
        for i in 0..3 {
            out[seg][5 + i] = integrate_slice(&mxy[i], z)? * species_kernel(p, te[i], omega_fat);
        }
        let echoes = simulate_echoes(&mxy[2], &profiles.inversion_theta, z, &timing.echo_times(), p.t2, out[seg][7]);
        out[seg][8..].copy_from_slice(&echoes);
    }
    Ok(out)
}

/// Both segments of a scan. `images[s * 11 + m]` is image `m + 1` of segment `s + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageSet {
    width: usize,
    height: usize,
    images: Vec<Grid<Complex32>>,
    pub timing: SequenceTiming,
    pub noise_sigma: f64,
}

impl ImageSet {
    pub fn new(images: Vec<Grid<Complex32>>, timing: SequenceTiming, noise_sigma: f64) -> Result<Self> {
        if images.len() != 2 * IMAGES_PER_SEGMENT {
            return Err(Error::DimensionMismatch(format!("expected 22 images, got {}", images.len())));
        }
        let (width, height) = (images[0].width(), images[0].height());
        if images.iter().any(|g| !g.same_shape(&images[0])) {
            return Err(Error::DimensionMismatch("images differ in size".into()));
        }
        Ok(Self {
            width,
            height,
            images,
            timing,
            noise_sigma,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn images(&self) -> &[Grid<Complex32>] {
        &self.images
    }

    /// `segment` in 1..=2, `index` in 1..=11.
    pub fn image(&self, segment: usize, index: usize) -> Result<&Grid<Complex32>> {
        if !(1..=2).contains(&segment) || !(1..=IMAGES_PER_SEGMENT).contains(&index) {
            return Err(Error::InvalidArgument(format!("no image I{index} in segment {segment}")));
        }
        Ok(&self.images[(segment - 1) * IMAGES_PER_SEGMENT + index - 1])
    }

    pub fn pixel(&self, x: usize, y: usize) -> Result<[[Complex64; IMAGES_PER_SEGMENT]; 2]> {
        let i = self.images[0].check_bounds(x, y)?;
        let mut out = [[Complex64::new(0.0, 0.0); IMAGES_PER_SEGMENT]; 2];
        for (n, img) in self.images.iter().enumerate() {
            let v = img.as_slice()[i];
            out[n / IMAGES_PER_SEGMENT][n % IMAGES_PER_SEGMENT] = Complex64::new(v.re as f64, v.im as f64);
        }
        Ok(out)
    }
}

/// Scan-level simulation settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanConfig {
    pub timing: SequenceTiming,
    pub rf: RfConfig,
    pub noise_sigma: f64,
    pub seed: u64,
    pub omega_fat: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            timing: SequenceTiming::default(),
            rf: RfConfig::default(),
            noise_sigma: 0.0,
            seed: 0,
            omega_fat: OMEGA_FAT,
        }
    }
}

/// Profile sets keyed by the exact bits of the B1 scale.
pub fn profile_cache(pulses: &PulseSet, ks: impl IntoIterator<Item = f64>) -> Result<HashMap<u64, ProfileSet>> {
    let mut keys: Vec<f64> = ks.into_iter().collect();
    keys.sort_by(f64::total_cmp);
    keys.dedup_by(|a, b| a.to_bits() == b.to_bits());
    let sets: Vec<Result<ProfileSet>> = keys.par_iter().map(|&k| pulses.profiles(k)).collect();
    keys.iter().zip(sets).map(|(k, s)| Ok((k.to_bits(), s?))).collect()
}

/// Simulates every phantom pixel and adds complex Gaussian noise drawn from a
/// per-pixel stream of `seed`, so the result does not depend on scheduling.
pub fn simulate_scan(phantom: &PhantomMap, cfg: &ScanConfig) -> Result<ImageSet> {
    phantom.validate()?;
    cfg.timing.validate()?;
    cfg.rf.validate()?;
    if !(cfg.noise_sigma >= 0.0 && cfg.noise_sigma.is_finite()) {
        return Err(Error::Validation("noise sigma must be finite and non-negative".into()));
    }
    let pulses = cfg.rf.pulses(&cfg.timing)?;
    let params = phantom.params().as_slice();
    let cache = profile_cache(&pulses, params.iter().filter(|p| p.m0() > 0.0).map(|p| p.b1_scale))?;
    let values: Vec<[[Complex64; IMAGES_PER_SEGMENT]; 2]> = params
        .par_iter()
        .enumerate()
        .map(|(idx, p)| {
            let mut v = match cache.get(&p.b1_scale.to_bits()) {
                Some(set) if p.m0() > 0.0 => simulate_pixel(p, &cfg.timing, set, cfg.omega_fat)?,
                _ => [[Complex64::new(0.0, 0.0); IMAGES_PER_SEGMENT]; 2],
            };
            if cfg.noise_sigma > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(idx as u64);
                for seg in v.iter_mut() {
                    for s in seg.iter_mut() {
                        let re: f64 = StandardNormal.sample(&mut rng);
                        let im: f64 = StandardNormal.sample(&mut rng);
                        *s += Complex64::new(re, im) * cfg.noise_sigma;
                    }
                }
            }
            Ok(v)
        })
        .collect::<Result<_>>()?;
    let (w, h) = (phantom.width(), phantom.height());
    let images = (0..2 * IMAGES_PER_SEGMENT)
        .map(|n| {
            let data = values
                .iter()
                .map(|v| {
                    let c = v[n / IMAGES_PER_SEGMENT][n % IMAGES_PER_SEGMENT];
                    Complex32::new(c.re as f32, c.im as f32)
                })
                .collect();
            Grid::from_vec(w, h, data)
        })
        .collect::<Result<Vec<_>>>()?;
    ImageSet::new(images, cfg.timing.clone(), cfg.noise_sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::PhantomRecipe;

    fn tissue() -> TissueParams {
        TissueParams {
            water_amp: 0.8,
            fat_amp: 0.2,
            t1: 0.8,
            t2: 0.07,
            t2s_water: 0.035,
            t2s_fat: 0.025,
            d_omega0: 2.0 * PI * 10.0,
            b1_scale: 1.0,
        }
    }

    fn hard_profiles(k: f64) -> (SequenceTiming, ProfileSet) {
        let timing = SequenceTiming::default();
        let set = RfConfig::hard().pulses(&timing).unwrap().profiles(k).unwrap();
        (timing, set)
    }

    #[test]
    fn default_timing_is_valid() {
        let t = SequenceTiming::default();
        t.validate().unwrap();
        assert_eq!(t.tr, 2.4);
        let e = t.echo_times();
        for (a, b) in e.iter().zip([0.012, 0.024, 0.040]) {
            assert!((a - b).abs() < 1e-12);
        }
        SequenceTiming::with_t_sat(0.2).validate().unwrap();
    }

    #[test]
    fn timing_rejects_bad_layouts() {
        let mut t = SequenceTiming::default();
        t.inversion_times[1] += 1e-3;
        assert!(t.validate().is_err());
        let mut t = SequenceTiming::default();
        t.probe_times[0] = 5e-3;
        assert!(t.validate().is_err());
        let t = SequenceTiming {
            tr: 1.0,
            ..SequenceTiming::default()
        };
        assert!(t.validate().is_err());
    }

    #[test]
    fn single_water_fid_is_real_positive() {
        let p = TissueParams {
            fat_amp: 0.0,
            d_omega0: 0.0,
            ..tissue()
        };
        let (timing, set) = hard_profiles(1.0);
        let v = simulate_pixel(&p, &timing, &set, OMEGA_FAT).unwrap();
        let s_sat = set.sat.integrated_unit_response();
        for m in 0..5 {
            assert!(v[0][m].im.abs() < 1e-12 && v[0][m].re > 0.0);
            let want = 0.8 * (-timing.acq_times[m] / 0.035).exp() * s_sat.norm();
            assert!((v[0][m].re - want).abs() < 1e-12);
        }
    }

    #[test]
    fn pure_fat_phase_advance() {
        let p = TissueParams {
            water_amp: 0.0,
            fat_amp: 1.0,
            ..tissue()
        };
        let (timing, set) = hard_profiles(1.0);
        let v = simulate_pixel(&p, &timing, &set, OMEGA_FAT).unwrap();
        let dt = timing.acq_times[1] - timing.acq_times[0];
        let step = (v[0][1] * v[0][0].conj()).arg();
        let want = Complex64::from_polar(1.0, (p.d_omega0 + OMEGA_FAT) * dt).arg();
        assert!((step - want).abs() < 1e-9);
    }

    #[test]
    fn segments_share_early_images_and_hard_ratio_is_one() {
        let (timing, set) = hard_profiles(1.0);
        let v = simulate_pixel(&tissue(), &timing, &set, OMEGA_FAT).unwrap();
        for m in 0..7 {
            assert_eq!(v[0][m], v[1][m]);
        }
        assert!((v[1][7].norm() / v[0][7].norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ideal_inversions_give_pure_decay() {
        let (timing, set) = hard_profiles(1.0);
        let p = tissue();
        let v = simulate_pixel(&p, &timing, &set, OMEGA_FAT).unwrap();
        let mxy = recovery_transverse(
            p.t1,
            p.m0(),
            0.0,
            [
                (timing.probe_times[0], &set.probe),
                (timing.probe_times[1], &set.probe),
                (timing.t_sat, &set.imaging[0]),
            ],
        );
        let source = integrate_slice(&mxy[2], &set.sat.z_samples).unwrap().norm();
        for (n, te) in timing.echo_times().iter().enumerate() {
            let want = source * (-te / p.t2).exp();
            assert!((v[0][8 + n].norm() / want - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn longer_recovery_gives_more_signal() {
        let p = tissue();
        let mut last = 0.0;
        for ts in [0.2, 0.6, 1.2, 2.0] {
            let timing = SequenceTiming::with_t_sat(ts);
            let set = RfConfig::hard().pulses(&timing).unwrap().profiles(1.0).unwrap();
            let v = simulate_pixel(&p, &timing, &set, OMEGA_FAT).unwrap();
            assert!(v[0][7].norm() > last);
            last = v[0][7].norm();
        }
    }

    #[test]
    fn mismatched_profiles_rejected() {
        let (timing, set) = hard_profiles(0.9);
        assert!(simulate_pixel(&tissue(), &timing, &set, OMEGA_FAT).is_err());
        let (_, mut set) = hard_profiles(1.0);
        set.inversion_theta.pop();
        assert!(simulate_pixel(&tissue(), &timing, &set, OMEGA_FAT).is_err());
    }

    fn small_scan(noise: f64, seed: u64, scale: f64) -> ImageSet {
        let mut recipe = PhantomRecipe::uniform_disc(12, 10, tissue()).unwrap();
        for r in recipe.regions.iter_mut() {
            r.params.water_amp *= scale;
            r.params.fat_amp *= scale;
        }
        let cfg = ScanConfig {
            rf: RfConfig {
                pieces: 32,
                z_samples: 17,
                ..RfConfig::default()
            },
            noise_sigma: noise,
            seed,
            ..ScanConfig::default()
        };
        simulate_scan(&recipe.build().unwrap(), &cfg).unwrap()
    }

    #[test]
    fn scan_determinism_and_linearity() {
        let a = small_scan(0.0, 1, 1.0);
        assert_eq!(a, small_scan(0.0, 1, 1.0));
        let b = small_scan(0.0, 1, 2.0);
        for (ga, gb) in a.images().iter().zip(b.images()) {
            for (va, vb) in ga.as_slice().iter().zip(gb.as_slice()) {
                assert!((vb - va * 2.0).norm() <= 1e-6 * vb.norm().max(1e-30));
            }
        }
        let n1 = small_scan(0.01, 5, 1.0);
        assert_eq!(n1, small_scan(0.01, 5, 1.0));
        assert_ne!(n1, small_scan(0.01, 6, 1.0));
    }

    #[test]
    fn image_accessors() {
        let s = small_scan(0.0, 0, 1.0);
        assert!(s.image(0, 1).is_err() && s.image(1, 12).is_err());
        let px = s.pixel(6, 5).unwrap();
        assert_eq!(px[1][10].re as f32, s.image(2, 11).unwrap()[(6, 5)].re);
        assert!(s.pixel(12, 0).is_err());
    }
}
