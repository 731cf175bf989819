//! Magnetization physics: RF rotations from piecewise-constant pulses, slice
//! profiles, relaxation, free precession, and ideal spoiling.
//!
//! Sign conventions (the rest of the crate relies on them):
//!
//! * RF nutation is a left-handed rotation about the B1 direction in the
//!   rotating frame. A pulse with phase 0 (real amplitude) tips `+z` toward
//!   `+y`; a pulse with phase `-pi/2` tips `+z` toward `+x`.
//! * Off-resonance precession is counter-clockwise in the transverse plane,
//!   `mxy <- mxy * exp(i * dw * t)`, the same sign as the water/fat signal model.
//!
//! Both are captured by a right-handed rotation of angle `dt * |(b1, dw)|` about
//! the axis `(-Re b1, -Im b1, dw)`.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Mat3 = [[f64; 3]; 3];

pub const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

pub fn transpose(a: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i];
        }
    }
    out
}

pub fn determinant(a: &Mat3) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

/// Frobenius norm of `R^T R - I`.
pub fn orthogonality_error(a: &Mat3) -> f64 {
    let p = mat_mul(&transpose(a), a);
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let d = p[i][j] - IDENTITY[i][j];
            s += d * d;
        }
    }
    s.sqrt()
}

/// Right-handed rotation by `angle` about the unit vector `axis` (Rodrigues).
pub fn axis_angle(axis: [f64; 3], angle: f64) -> Mat3 {
    let [x, y, z] = axis;
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    [
        [c + x * x * t, x * y * t - z * s, x * z * t + y * s],
        [y * x * t + z * s, c + y * y * t, y * z * t - x * s],
        [z * x * t - y * s, z * y * t + x * s, c + z * z * t],
    ]
}

/// Counter-clockwise rotation about `+z` (free precession by `angle`).
pub fn z_rotation(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MagVec {
    pub mx: f64,
    pub my: f64,
    pub mz: f64,
}

impl MagVec {
    pub const fn new(mx: f64, my: f64, mz: f64) -> Self {
        Self { mx, my, mz }
    }

    pub const fn longitudinal(mz: f64) -> Self {
        Self::new(0.0, 0.0, mz)
    }

    pub fn transverse(&self) -> Complex64 {
        Complex64::new(self.mx, self.my)
    }

    pub fn rotate(&self, r: &Mat3) -> Self {
        Self {
            mx: r[0][0] * self.mx + r[0][1] * self.my + r[0][2] * self.mz,
            my: r[1][0] * self.mx + r[1][1] * self.my + r[1][2] * self.mz,
            mz: r[2][0] * self.mx + r[2][1] * self.my + r[2][2] * self.mz,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.mx.is_finite() && self.my.is_finite() && self.mz.is_finite()
    }
}

/// Rotation produced by one constant piece of RF.
///
/// `amp` is the complex nutation rate in rad/s, `dw` the off-resonance seen by
/// the spin during the piece. Zero field gives the identity.
pub fn piece_rotation(amp: Complex64, dt: f64, dw: f64) -> Mat3 {
    let axis = [-amp.re, -amp.im, dw];
    let rate = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    if rate == 0.0 {
        return IDENTITY;
    }
    axis_angle([axis[0] / rate, axis[1] / rate, axis[2] / rate], rate * dt)
}

/// A piecewise-constant RF pulse played under a constant slice-select gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct RfPulse {
    /// Complex nutation rate per piece (rad/s).
    pub samples: Vec<Complex64>,
    /// Seconds per piece.
    pub dt: f64,
    /// gamma * Gz in rad/(s*m); a spin at `z` sees `slice_gradient * z` of off-resonance.
    pub slice_gradient: f64,
    pub nominal_flip: f64,
    /// Duration of the reversed slice-select lobe played after the pulse (seconds).
    /// Half the pulse duration refocuses a symmetric excitation; zero for refocusing pulses.
    pub rephase_time: f64,
}

/// Shape of a slice-selective pulse.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SincShape {
    /// Seconds.
    pub duration: f64,
    pub time_bandwidth: f64,
    pub pieces: usize,
    /// Meters.
    pub slice_thickness: f64,
}

impl Default for SincShape {
    fn default() -> Self {
        Self {
            duration: 2e-3,
            time_bandwidth: 4.0,
            pieces: 256,
            slice_thickness: 4e-3,
        }
    }
}

impl RfPulse {
    /// Single-piece pulse without slice selection.
    pub fn hard(flip: f64, phase: f64, duration: f64) -> Self {
        Self {
            samples: vec![Complex64::from_polar(flip / duration, phase)],
            dt: duration,
            slice_gradient: 0.0,
            nominal_flip: flip,
            rephase_time: 0.0,
        }
    }

    /// Hamming-windowed sinc with the given time-bandwidth product, scaled so the
    /// coherent area equals `flip`. The gradient is chosen so the pulse bandwidth
    /// maps onto `shape.slice_thickness`.
    pub fn windowed_sinc(flip: f64, phase: f64, shape: &SincShape, refocus: bool) -> Result<Self> {
        if shape.pieces == 0 || shape.duration <= 0.0 || shape.slice_thickness <= 0.0 {
            return Err(Error::InvalidArgument("degenerate pulse shape".into()));
        }
        let n = shape.pieces;
        let dt = shape.duration / n as f64;
        let envelope: Vec<f64> = (0..n)
            .map(|j| {
                // piece midpoints, normalized to [-1/2, 1/2)
                let u = (j as f64 + 0.5) / n as f64 - 0.5;
                let x = shape.time_bandwidth * u;
                let sinc = if x == 0.0 {
                    1.0
                } else {
                    (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x)
                };
                sinc * (0.54 + 0.46 * (2.0 * std::f64::consts::PI * u).cos())
            })
            .collect();
        let area: f64 = envelope.iter().sum::<f64>() * dt;
        let rot = Complex64::from_polar(1.0, phase);
        let samples = envelope.iter().map(|e| rot * (flip * e / area)).collect();
        let bandwidth_hz = shape.time_bandwidth / shape.duration;
        Ok(Self {
            samples,
            dt,
            slice_gradient: 2.0 * std::f64::consts::PI * bandwidth_hz / shape.slice_thickness,
            nominal_flip: flip,
            rephase_time: if refocus { 0.0 } else { shape.duration / 2.0 },
        })
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.samples.len() as f64
    }

    /// Coherent area `sum(samples) * dt`; its modulus equals the nominal flip.
    pub fn area(&self) -> Complex64 {
        self.samples.iter().sum::<Complex64>() * self.dt
    }
}

/// Composite rotation `R(z)` of one pulse at each slice position.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceProfile {
    pub z_samples: Vec<f64>,
    pub rotations: Vec<Mat3>,
}

impl SliceProfile {
    /// Transverse magnetization at each z after the pulse acts on `mz(z)` along `+z`.
    pub fn excite(&self, mz: &[f64]) -> Vec<Complex64> {
        self.rotations
            .iter()
            .zip(mz)
            .map(|(r, &m)| Complex64::new(r[0][2] * m, r[1][2] * m))
            .collect()
    }

    /// Transverse response to unit longitudinal magnetization.
    pub fn excite_unit(&self) -> Vec<Complex64> {
        self.rotations
            .iter()
            .map(|r| Complex64::new(r[0][2], r[1][2]))
            .collect()
    }

    /// Fraction of longitudinal magnetization left on `+z`, per z.
    pub fn longitudinal_factor(&self) -> Vec<f64> {
        self.rotations.iter().map(|r| r[2][2]).collect()
    }

    /// Slice integral of the transverse response to unit `Mz`.
    pub fn integrated_unit_response(&self) -> Complex64 {
        integrate_slice(&self.excite_unit(), &self.z_samples)
            .expect("profile z grid has at least two samples")
    }
}

/// Composite rotation `R(z) = P * R_M * ... * R_1` for the pulse scaled by
/// `b1_scale`, where `P` is the rephasing lobe.
pub fn slice_profile(pulse: &RfPulse, b1_scale: f64, z_samples: &[f64]) -> Result<SliceProfile> {
    if pulse.samples.is_empty() {
        return Err(Error::InvalidArgument("pulse has no samples".into()));
    }
    if pulse.dt <= 0.0 {
        return Err(Error::InvalidArgument("pulse dt must be positive".into()));
    }
    if z_samples.is_empty() {
        return Err(Error::InvalidArgument("no z samples".into()));
    }
    if z_samples.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("z samples must be ordered".into()));
    }
    let scaled: Vec<Complex64> = pulse.samples.iter().map(|s| s * b1_scale).collect();
    let rotations = z_samples
        .iter()
        .map(|&z| {
            let dw = pulse.slice_gradient * z;
            let mut r = IDENTITY;
            for &amp in &scaled {
                r = mat_mul(&piece_rotation(amp, pulse.dt, dw), &r);
            }
            if pulse.rephase_time > 0.0 {
                r = mat_mul(&z_rotation(-dw * pulse.rephase_time), &r);
            }
            r
        })
        .collect();
    Ok(SliceProfile {
        z_samples: z_samples.to_vec(),
        rotations,
    })
}

/// `n` uniform positions over `[-extent, extent]`.
pub fn z_grid(extent: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n)
            .map(|i| -extent + 2.0 * extent * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// T2 decay of the transverse part and T1 recovery of `mz` toward `m0` over `dt`.
pub fn relax_recover(m: MagVec, dt: f64, t1: f64, t2: f64, m0: f64) -> MagVec {
    let e2 = (-dt / t2).exp();
    let e1 = (-dt / t1).exp();
    MagVec {
        mx: m.mx * e2,
        my: m.my * e2,
        mz: m.mz * e1 + m0 * (1.0 - e1),
    }
}

pub fn precess(mxy: Complex64, dt: f64, dw: f64) -> Complex64 {
    mxy * Complex64::from_polar(1.0, dw * dt)
}

/// Ideal spoiler: transverse magnetization is destroyed.
pub fn spoil(m: MagVec) -> MagVec {
    MagVec::longitudinal(m.mz)
}

/// Riemann sum of `values` over `[z_min, z_max]`.
///
/// Each sample owns the cell between the midpoints to its neighbors, clipped to
/// the sampled interval, so a constant integrates exactly to `c * (z_max - z_min)`.
pub fn integrate_slice(values: &[Complex64], z_samples: &[f64]) -> Result<Complex64> {
    if values.len() != z_samples.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} values for {} z samples",
            values.len(),
            z_samples.len()
        )));
    }
    let n = z_samples.len();
    if n < 2 {
        return Err(Error::InvalidArgument("slice integral needs at least two samples".into()));
    }
    let mut sum = Complex64::new(0.0, 0.0);
    for i in 0..n {
        let left = if i == 0 { z_samples[0] } else { 0.5 * (z_samples[i - 1] + z_samples[i]) };
        let right = if i == n - 1 {
            z_samples[n - 1]
        } else {
            0.5 * (z_samples[i] + z_samples[i + 1])
        };
        sum += values[i] * (right - left);
    }
    Ok(sum)
}

/// Real-valued variant of [`integrate_slice`].
pub fn integrate_slice_real(values: &[f64], z_samples: &[f64]) -> Result<f64> {
    let as_complex: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    integrate_slice(&as_complex, z_samples).map(|c| c.re)
}

/// Rotation angle of a rotation matrix, `acos((trace - 1) / 2)` in `[0, pi]`.
pub fn rotation_angle(r: &Mat3) -> Result<f64> {
    if orthogonality_error(r) > 1e-6 || (determinant(r) - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidArgument("matrix is not a proper rotation".into()));
    }
    let c = ((r[0][0] + r[1][1] + r[2][2] - 1.0) / 2.0).clamp(-1.0, 1.0);
    Ok(c.acos())
}

/// Tip of `+z` produced by a rotation, `acos(R_zz)` in `[0, pi]`.
///
/// This is the polar Euler angle of the composite rotation. Unlike the
/// axis-angle value it ignores the precession about `z` that a slice-select
/// gradient adds to off-center spins, so it is the angle that sets echo
/// amplitudes.
pub fn nutation_angle(r: &Mat3) -> f64 {
    r[2][2].clamp(-1.0, 1.0).acos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn close(a: MagVec, b: MagVec, tol: f64) -> bool {
        (a.mx - b.mx).abs() < tol && (a.my - b.my).abs() < tol && (a.mz - b.mz).abs() < tol
    }

    #[test]
    fn zero_field_is_identity() {
        assert_eq!(piece_rotation(Complex64::new(0.0, 0.0), 1e-3, 0.0), IDENTITY);
    }

    #[test]
    fn quarter_turn_about_x() {
        let dt = 1e-3;
        let r = piece_rotation(Complex64::new(FRAC_PI_2 / dt, 0.0), dt, 0.0);
        let m = MagVec::longitudinal(1.0).rotate(&r);
        assert!(close(m, MagVec::new(0.0, 1.0, 0.0), 1e-12), "{m:?}");
    }

    #[test]
    fn minus_y_phase_tips_onto_x() {
        let dt = 1e-3;
        let r = piece_rotation(Complex64::from_polar(FRAC_PI_2 / dt, -FRAC_PI_2), dt, 0.0);
        let m = MagVec::longitudinal(1.0).rotate(&r);
        assert!(close(m, MagVec::new(1.0, 0.0, 0.0), 1e-12), "{m:?}");
    }

    #[test]
    fn half_turn_precession() {
        let dt = 1e-3;
        let r = piece_rotation(Complex64::new(0.0, 0.0), dt, PI / dt);
        let m = MagVec::new(1.0, 0.0, 0.0).rotate(&r);
        assert!(close(m, MagVec::new(-1.0, 0.0, 0.0), 1e-12));
    }

    #[test]
    fn precession_matches_precess() {
        let dt = 1e-3;
        let dw = 700.0;
        let r = piece_rotation(Complex64::new(0.0, 0.0), dt, dw);
        let m = MagVec::new(0.3, -0.8, 0.1).rotate(&r);
        let expected = precess(Complex64::new(0.3, -0.8), dt, dw);
        assert!((m.transverse() - expected).norm() < 1e-12);
    }

    #[test]
    fn two_pieces_compose() {
        let dt = 1e-4;
        let amp = Complex64::from_polar(2000.0, 0.4);
        let two = mat_mul(&piece_rotation(amp, dt, 0.0), &piece_rotation(amp, dt, 0.0));
        let one = piece_rotation(amp, 2.0 * dt, 0.0);
        for i in 0..3 {
            for j in 0..3 {
                assert!((two[i][j] - one[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hard_pulse_profile_matches_piece() {
        let pulse = RfPulse::hard(1.1, 0.3, 1e-3);
        let prof = slice_profile(&pulse, 1.0, &[-1e-3, 0.0, 2e-3]).unwrap();
        let piece = piece_rotation(pulse.samples[0], pulse.dt, 0.0);
        for r in &prof.rotations {
            assert_eq!(*r, piece);
        }
    }

    #[test]
    fn zero_b1_is_identity() {
        let pulse = RfPulse::windowed_sinc(FRAC_PI_2, 0.0, &SincShape::default(), true).unwrap();
        let prof = slice_profile(&pulse, 0.0, &z_grid(8e-3, 17)).unwrap();
        for (r, z) in prof.rotations.iter().zip(&prof.z_samples) {
            // only gradient precession remains; +z untouched
            assert!((r[2][2] - 1.0).abs() < 1e-12, "z = {z}");
            assert!(orthogonality_error(r) < 1e-9);
        }
        let hard = RfPulse::hard(1.0, 0.0, 1e-3);
        let prof = slice_profile(&hard, 0.0, &[0.0, 1.0]).unwrap();
        assert!(prof.rotations.iter().all(|r| *r == IDENTITY));
    }

    #[test]
    fn sinc_area_is_flip() {
        let pulse = RfPulse::windowed_sinc(PI / 3.0, -FRAC_PI_2, &SincShape::default(), false).unwrap();
        assert!((pulse.area().norm() - PI / 3.0).abs() < 1e-9);
        assert!((pulse.duration() - 2e-3).abs() < 1e-15);
    }

    #[test]
    fn profiles_are_rotations() {
        let pulse = RfPulse::windowed_sinc(2.0 * PI / 3.0, -FRAC_PI_2, &SincShape::default(), false).unwrap();
        let prof = slice_profile(&pulse, 1.3, &z_grid(8e-3, 129)).unwrap();
        for r in &prof.rotations {
            assert!(orthogonality_error(r) < 1e-9);
            assert!((determinant(r) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn errors() {
        let mut pulse = RfPulse::hard(1.0, 0.0, 1e-3);
        assert!(slice_profile(&pulse, 1.0, &[]).is_err());
        assert!(slice_profile(&pulse, 1.0, &[1.0, 0.0]).is_err());
        pulse.samples.clear();
        assert!(slice_profile(&pulse, 1.0, &[0.0]).is_err());
    }

    #[test]
    fn relaxation() {
        let m = MagVec::new(0.2, 0.3, 0.4);
        assert_eq!(relax_recover(m, 0.0, 1.0, 0.1, 1.0), m);
        let full = relax_recover(MagVec::default(), 50.0, 1.0, 0.1, 2.5);
        assert!((full.mz - 2.5).abs() < 1e-9);
        let one = relax_recover(MagVec::new(1.0, 0.0, 0.7), 0.08, 1.0, 0.08, 1.0);
        assert!((one.mx - (-1.0f64).exp()).abs() < 1e-15);
        let fixed = relax_recover(MagVec::longitudinal(3.0), 0.37, 0.9, 0.05, 3.0);
        assert!((fixed.mz - 3.0).abs() < 1e-15);
    }

    #[test]
    fn precession_examples() {
        let z = Complex64::new(0.3, 0.4);
        assert_eq!(precess(z, 1.0, 0.0), z);
        assert!((precess(z, 1e-3, 2.0 * PI / 1e-3) - z).norm() < 1e-12);
        let q = precess(Complex64::new(1.0, 0.0), 1.0, FRAC_PI_2);
        assert!((q - Complex64::new(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn spoiling() {
        assert_eq!(spoil(MagVec::new(1.0, 2.0, 3.0)), MagVec::new(0.0, 0.0, 3.0));
        assert_eq!(spoil(MagVec::new(0.0, 0.0, 5.0)), MagVec::new(0.0, 0.0, 5.0));
        let m = MagVec::new(-1.0, 4.0, 0.5);
        assert_eq!(spoil(spoil(m)), spoil(m));
    }

    #[test]
    fn slice_integral() {
        let z = z_grid(0.5, 11);
        let c = Complex64::new(2.0, -1.0);
        let v = vec![c; z.len()];
        assert!((integrate_slice(&v, &z).unwrap() - c).norm() < 1e-12);

        let odd: Vec<Complex64> = z.iter().map(|&z| Complex64::new(z * z * z, -z)).collect();
        assert!(integrate_slice(&odd, &z).unwrap().norm() < 1e-12);

        let ramp_z: Vec<f64> = (0..1001).map(|i| i as f64 / 1000.0).collect();
        let ramp = integrate_slice_real(&ramp_z, &ramp_z).unwrap();
        assert!((ramp - 0.5).abs() < 1e-3);

        assert!(integrate_slice(&v[..3], &z).is_err());
        assert!(integrate_slice(&v[..1], &z[..1]).is_err());
    }

    #[test]
    fn angles() {
        assert_eq!(rotation_angle(&IDENTITY).unwrap(), 0.0);
        let rx = axis_angle([1.0, 0.0, 0.0], PI);
        assert!((rotation_angle(&rx).unwrap() - PI).abs() < 1e-12);
        let n = [0.48, -0.6, 0.64];
        let r = axis_angle(n, 0.3);
        assert!((rotation_angle(&r).unwrap() - 0.3).abs() < 1e-12);
        let bad = [[2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(rotation_angle(&bad).is_err());
        assert!((nutation_angle(&rx) - PI).abs() < 1e-12);
        // precession about z leaves the nutation angle untouched
        let r = mat_mul(&z_rotation(1.0), &mat_mul(&axis_angle([0.0, 1.0, 0.0], 0.7), &z_rotation(0.4)));
        assert!((nutation_angle(&r) - 0.7).abs() < 1e-12);
    }
}
