//! Closed-loop helpers shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use multimap_core::b1map::{build_ratio_table, RatioTable};
use multimap_core::bloch::{axis_angle, integrate_slice_real, orthogonality_error, piece_rotation, slice_profile, z_grid, RfPulse, SincShape};
use multimap_core::fitcore::linalg::norm;
use multimap_core::fitcore::{lsq_solve, Matrix};
use multimap_core::image::Grid;
use multimap_core::maskgen::{make_mask, mean_image, Mask, MaskConfig};
use multimap_core::phantom::{bottle_params, PhantomMap, PhantomRecipe, TissueParams};
use multimap_core::pipeline::{estimate, EstimateConfig, QuantMaps};
use multimap_core::seqsim::{simulate_scan, ImageSet, RfConfig, ScanConfig, SequenceTiming};
use multimap_core::t2fit::f_n;

pub fn bottle(label: u8) -> TissueParams {
    bottle_params()
        .into_iter()
        .find(|b| b.0 == label)
        .expect("bottle label 1..=6")
        .2
}

pub fn default_table() -> RatioTable {
    let pulses = RfConfig::default().pulses(&SequenceTiming::default()).unwrap();
    let k = EstimateConfig::default().b1.k_grid().unwrap();
    build_ratio_table(&pulses.imaging[0], &pulses.imaging[1], &k, &pulses.z).unwrap()
}

pub struct Run {
    pub phantom: PhantomMap,
    pub images: ImageSet,
    pub mask: Mask,
    pub maps: QuantMaps,
}

impl Run {
    /// Valid estimates of `name` inside the mask and region `label`.
    pub fn values(&self, name: &str, label: u8) -> Vec<f64> {
        let m = self.maps.get(name).unwrap();
        let labels = self.phantom.labels().as_slice();
        (0..m.values.len())
            .filter(|&i| labels[i] == label && self.mask.as_slice()[i] && m.valid.as_slice()[i])
            .map(|i| m.values.as_slice()[i])
            .collect()
    }

    pub fn median(&self, name: &str, label: u8) -> f64 {
        median(self.values(name, label))
    }
}

pub fn median(mut v: Vec<f64>) -> f64 {
    assert!(!v.is_empty(), "no pixels to take a median of");
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn rel_err(est: f64, truth: f64) -> f64 {
    (est / truth - 1.0).abs()
}

/// Simulate, mask from the images, estimate.
pub fn run(recipe: &PhantomRecipe, scan: &ScanConfig, table: &RatioTable) -> Run {
    let phantom = recipe.build().unwrap();
    let images = simulate_scan(&phantom, scan).unwrap();
    let mask = make_mask(&mean_image(&images), &MaskConfig::default()).unwrap();
    let maps = estimate(&images, &mask, &EstimateConfig::default(), Some(table)).unwrap();
    Run {
        phantom,
        images,
        mask,
        maps,
    }
}

pub fn scan(t_sat: f64, noise_sigma: f64, seed: u64) -> ScanConfig {
    ScanConfig {
        timing: SequenceTiming::with_t_sat(t_sat),
        noise_sigma,
        seed,
        ..ScanConfig::default()
    }
}

pub fn disc(params: TissueParams) -> PhantomRecipe {
    PhantomRecipe::uniform_disc(16, 16, params).unwrap()
}

/// `|I8|` of segment 1 at the disc center in a noiseless scan.
pub fn reference_i8(params: TissueParams, t_sat: f64) -> f64 {
    let ph = disc(params).build().unwrap();
    let images = simulate_scan(&ph, &scan(t_sat, 0.0, 0)).unwrap();
    images.image(1, 8).unwrap()[(8, 8)].norm() as f64
}

// Physics invariants. Each returns the measured error.

/// Largest `|R^T R - I|` over sequence slice profiles and random rotations.
pub fn rotation_orthogonality() -> f64 {
    let mut worst = 0.0f64;
    let pulses = RfConfig::default().pulses(&SequenceTiming::default()).unwrap();
    for k in [0.5, 1.0, 1.5] {
        let set = pulses.profiles(k).unwrap();
        for prof in [&set.sat, &set.probe, &set.imaging[0], &set.imaging[1], &set.inversion] {
            for r in &prof.rotations {
                worst = worst.max(orthogonality_error(r));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..1000 {
        let axis: [f64; 3] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let r = axis_angle([axis[0] / n, axis[1] / n, axis[2] / n], rng.random_range(-10.0..10.0));
        worst = worst.max(orthogonality_error(&r));
        let amp = Complex64::from_polar(rng.random_range(0.0..5000.0), rng.random_range(-PI..PI));
        let p = piece_rotation(amp, rng.random_range(1e-6..1e-3), rng.random_range(-1e4..1e4));
        worst = worst.max(orthogonality_error(&p));
    }
    worst
}

pub fn f_n_at_pi() -> [f64; 3] {
    [1, 2, 3].map(|n| f_n(n, PI).unwrap())
}

/// RMS difference of max-normalized `|Mxy(z)|` of a 5 degree sinc and the
/// magnitude of the discrete Fourier transform of its envelope.
pub fn small_tip_fourier_rms() -> f64 {
    let shape = SincShape::default();
    let pulse = RfPulse::windowed_sinc(5f64.to_radians(), -PI / 2.0, &shape, false).unwrap();
    let z = z_grid(2.0 * shape.slice_thickness, 257);
    let bloch: Vec<f64> = slice_profile(&pulse, 1.0, &z)
        .unwrap()
        .excite_unit()
        .iter()
        .map(|v| v.norm())
        .collect();
    let t_end = pulse.duration();
    let fourier: Vec<f64> = z
        .iter()
        .map(|&zi| {
            let dw = pulse.slice_gradient * zi;
            pulse
                .samples
                .iter()
                .enumerate()
                .map(|(j, b)| b * pulse.dt * Complex64::from_polar(1.0, dw * (t_end - (j as f64 + 0.5) * pulse.dt)))
                .sum::<Complex64>()
                .norm()
        })
        .collect();
    let mb = bloch.iter().cloned().fold(0.0, f64::max);
    let mf = fourier.iter().cloned().fold(0.0, f64::max);
    let ss: f64 = bloch.iter().zip(&fourier).map(|(b, f)| (b / mb - f / mf).powi(2)).sum();
    (ss / z.len() as f64).sqrt()
}

/// Relative error of the slice Riemann sum on `a + b z`.
pub fn riemann_ramp_error() -> f64 {
    let n = 129;
    let (z0, z1) = (-3e-3, 9e-3);
    let z: Vec<f64> = (0..n).map(|i| z0 + (z1 - z0) * i as f64 / (n - 1) as f64).collect();
    let (a, b) = (0.3, 250.0);
    let v: Vec<f64> = z.iter().map(|zi| a + b * zi).collect();
    let exact = a * (z1 - z0) + 0.5 * b * (z1 * z1 - z0 * z0);
    (integrate_slice_real(&v, &z).unwrap() / exact - 1.0).abs()
}

/// Largest `|A^H r| / (|A| |b|)` over random overdetermined complex systems.
pub fn lsq_normal_residual() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(60);
    let mut c = || Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let mut worst = 0.0f64;
    for (rows, cols) in [(5, 2), (8, 3), (20, 4), (40, 7)] {
        let a = Matrix::from_fn(rows, cols, |_, _| c());
        let b: Vec<Complex64> = (0..rows).map(|_| c()).collect();
        let x = lsq_solve(&a, &b).unwrap().x;
        let r: Vec<Complex64> = a.mul_vec(&x).iter().zip(&b).map(|(p, q)| p - q).collect();
        let a_norm = (0..cols).map(|j| norm(a.column(j)).powi(2)).sum::<f64>().sqrt();
        worst = worst.max(norm(&a.adjoint_mul_vec(&r)) / (a_norm * norm(&b)));
    }
    worst
}

pub fn full_mask(w: usize, h: usize) -> Mask {
    Grid::filled(w, h, true)
}
