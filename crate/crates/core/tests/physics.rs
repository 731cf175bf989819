mod common;

use std::f64::consts::PI;

use multimap_core::bloch::{slice_profile, z_grid, RfPulse, SincShape};
use multimap_core::seqsim::{RfConfig, SequenceTiming};
use multimap_core::t2fit::f_n;

#[test]
fn rotations_stay_orthogonal() {
    let e = common::rotation_orthogonality();
    assert!(e < 1e-9, "orthogonality error {e:e}");
}

#[test]
fn f_n_endpoints_are_exact() {
    assert_eq!(common::f_n_at_pi(), [1.0, 1.0, 1.0]);
    for n in 1..=3 {
        assert_eq!(f_n(n, 0.0).unwrap(), 0.0);
    }
}

#[test]
fn small_tip_profile_matches_fourier_transform() {
    let rms = common::small_tip_fourier_rms();
    assert!(rms < 0.02, "rms {rms}");
}

#[test]
fn riemann_sum_integrates_ramps() {
    let e = common::riemann_ramp_error();
    assert!(e < 1e-3, "relative error {e:e}");
}

#[test]
fn lsq_residual_is_normal_to_columns() {
    let e = common::lsq_normal_residual();
    assert!(e < 1e-9, "{e:e}");
}

#[test]
fn refocused_excitation_has_flat_phase_in_the_slice() {
    let shape = SincShape::default();
    let pulse = RfPulse::windowed_sinc(PI / 6.0, -PI / 2.0, &shape, false).unwrap();
    let z = z_grid(0.4 * shape.slice_thickness, 21);
    let m = slice_profile(&pulse, 1.0, &z).unwrap().excite_unit();
    let centre = m[10].arg();
    for v in &m {
        let d = (v.arg() - centre + PI).rem_euclid(2.0 * PI) - PI;
        assert!(d.abs() < 0.05, "phase drifts by {d}");
    }
}

#[test]
fn inversion_flips_the_slice_centre() {
    let timing = SequenceTiming::default();
    let set = RfConfig::default().pulses(&timing).unwrap().profiles(1.0).unwrap();
    let lz = set.inversion.longitudinal_factor();
    let mid = lz.len() / 2;
    assert!(lz[mid] < -0.99, "{}", lz[mid]);
    // far outside the slice nothing happens
    assert!(lz[0] > 0.99 && lz[lz.len() - 1] > 0.99);
}

#[test]
fn flip_scales_with_b1_for_hard_pulses() {
    let pulse = RfPulse::hard(PI / 3.0, 0.0, 1e-3);
    for k in [0.5, 1.0, 1.5] {
        let p = slice_profile(&pulse, k, &[0.0]).unwrap();
        let got = p.longitudinal_factor()[0];
        assert!((got - (k * PI / 3.0).cos()).abs() < 1e-12);
    }
}
