//! Step 2: T2 from the three spin echoes of both segments, corrected for
//! imperfect refocusing across the slice.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bloch::{integrate_slice_real, nutation_angle, SliceProfile};
use crate::error::{Error, Result};
use crate::fitcore::{solve_boxed, BoxedProblem, SolverOptions};

/// Echo attenuation for the `n`-th spin echo (1-based) after refocusing pulses
/// of angle `theta`, including the stimulated-echo contribution to echo 3.
pub fn f_n(n: usize, theta: f64) -> Result<f64> {
    let c = theta.cos();
    let s = theta.sin();
    let a = 1.0 - c;
    match n {
        1 => Ok(a / 2.0),
        2 => Ok(a * a / 4.0),
        3 => Ok(a * a * a / 8.0 + a * (1.0 + c) * (1.0 + c) / 8.0 + c * s * s / 2.0),
        _ => Err(Error::InvalidArgument(format!("echo index {n} is not in 1..=3"))),
    }
}

fn f_all(theta: f64) -> [f64; 3] {
    [1, 2, 3].map(|n| f_n(n, theta).expect("index in range"))
}

/// Per-segment slice model for the echo train.
#[derive(Clone, Debug, PartialEq)]
pub struct EchoModelContext {
    pub z_samples: Vec<f64>,
    /// Refocusing angle per z, in `[0, pi]`.
    pub theta_z: Vec<f64>,
    /// Transverse magnitude per z created by the imaging pulse from unit `Mz`.
    pub weight_z: Vec<f64>,
    /// Echo times measured from the imaging pulse (seconds).
    pub echo_times: [f64; 3],
    pub k: f64,
}

impl EchoModelContext {
    pub fn from_profiles(
        imaging: &SliceProfile,
        inversion: &SliceProfile,
        echo_times: [f64; 3],
        k: f64,
    ) -> Result<Self> {
        if imaging.z_samples != inversion.z_samples {
            return Err(Error::DimensionMismatch("imaging and inversion profiles use different z grids".into()));
        }
        if !(echo_times[0] > 0.0 && echo_times[0] < echo_times[1] && echo_times[1] < echo_times[2]) {
            return Err(Error::InvalidArgument("echo times must be positive and increasing".into()));
        }
        Ok(Self {
            z_samples: imaging.z_samples.clone(),
            theta_z: inversion.rotations.iter().map(nutation_angle).collect(),
            weight_z: imaging.excite_unit().iter().map(|m| m.norm()).collect(),
            echo_times,
            k,
        })
    }

    /// Idealized context: one refocusing angle everywhere on a two-point grid of unit span.
    pub fn uniform(theta: f64, echo_times: [f64; 3]) -> Self {
        Self {
            z_samples: vec![-0.5, 0.5],
            theta_z: vec![theta; 2],
            weight_z: vec![1.0; 2],
            echo_times,
            k: 1.0,
        }
    }
}

/// Slice-integrated echo amplitudes for an arbitrary transverse weight per z.
pub fn echo_train(weight_z: &[f64], theta_z: &[f64], z: &[f64], echo_times: &[f64; 3], t2: f64) -> [f64; 3] {
    let fs: Vec<[f64; 3]> = theta_z.iter().map(|&t| f_all(t)).collect();
    let mut out = [0.0; 3];
    for (n, o) in out.iter_mut().enumerate() {
        let decay = (-echo_times[n] / t2).exp();
        let vals: Vec<f64> = weight_z.iter().zip(&fs).map(|(w, f)| w * f[n] * decay).collect();
        *o = integrate_slice_real(&vals, z).expect("matching slice grid");
    }
    out
}

/// Model magnitudes of the three echoes for amplitude `amp` (the longitudinal
/// magnetization hit by the imaging pulse) and `t2`.
pub fn predict_echoes(amp: f64, t2: f64, ctx: &EchoModelContext) -> [f64; 3] {
    echo_train(&ctx.weight_z, &ctx.theta_z, &ctx.z_samples, &ctx.echo_times, t2).map(|v| amp * v)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct T2Config {
    pub t2_min: f64,
    pub t2_max: f64,
    pub max_iter: usize,
    pub tol: f64,
    /// Reweighting passes that turn the stacked least-squares fit into the
    /// sum-of-segment-norms objective.
    pub reweight_passes: usize,
}

impl Default for T2Config {
    fn default() -> Self {
        Self {
            t2_min: 5e-3,
            t2_max: 3.0,
            max_iter: 200,
            tol: 1e-10,
            reweight_passes: 8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct T2Fit {
    pub t2: f64,
    pub amp: f64,
    /// Sum of the two segment residual norms.
    pub cost: f64,
    /// The estimate sits on a T2 bound.
    pub at_bound: bool,
}

/// Log-linear fit `ln y = ln c - t / T2`; returns `(T2, c)`. A non-decaying
/// train yields an infinite T2.
pub fn log_linear_init(echoes: &[f64; 3], times: &[f64; 3]) -> Option<(f64, f64)> {
    if echoes.iter().any(|&e| !(e > 0.0)) {
        return None;
    }
    let ly: Vec<f64> = echoes.iter().map(|e| e.ln()).collect();
    let tm = times.iter().sum::<f64>() / 3.0;
    let lm = ly.iter().sum::<f64>() / 3.0;
    let sxy: f64 = times.iter().zip(&ly).map(|(t, l)| (t - tm) * (l - lm)).sum();
    let sxx: f64 = times.iter().map(|t| (t - tm).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = lm - slope * tm;
    let t2 = if slope < 0.0 { -1.0 / slope } else { f64::INFINITY };
    Some((t2, intercept.exp()))
}

/// Fits `(T2, amp)` to the echoes of both segments, each with its own slice model.
pub fn fit_t2(
    echoes_seg1: &[f64; 3],
    echoes_seg2: &[f64; 3],
    ctx: [&EchoModelContext; 2],
    cfg: &T2Config,
) -> Result<T2Fit> {
    let all: Vec<f64> = echoes_seg1.iter().chain(echoes_seg2).copied().collect();
    if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidArgument("echo magnitudes must be finite and non-negative".into()));
    }
    let scale = all.iter().copied().fold(0.0f64, f64::max);
    if scale == 0.0 {
        return Err(Error::Numerical("all echoes are zero".into()));
    }
    let y1 = echoes_seg1.map(|v| v / scale);
    let y2 = echoes_seg2.map(|v| v / scale);
    // amplitude is fitted relative to the segment-1 unit-amplitude first echo at T2 -> inf
    let unit = predict_echoes(1.0, f64::INFINITY, ctx[0])[0];
    if !(unit > 0.0) {
        return Err(Error::Numerical("imaging profile produces no echo".into()));
    }

    let (lo, hi) = (cfg.t2_min, cfg.t2_max);
    let t2_init = log_linear_init(&y1, &ctx[0].echo_times)
        .map(|(t2, _)| t2)
        .filter(|t| t.is_finite())
        .unwrap_or(0.5 * hi)
        .clamp(lo + 1e-3 * (hi - lo), hi - 1e-3 * (hi - lo));
    let shape = predict_echoes(1.0, t2_init, ctx[0]);
    let amp_init = (y1.iter().zip(&shape).map(|(y, s)| y * s).sum::<f64>()
        / shape.iter().map(|s| s * s).sum::<f64>()
        * unit)
        .max(1e-6);

    let opts = SolverOptions {
        max_iter: cfg.max_iter,
        tol: cfg.tol,
    };
    let seg_residuals = |x: &[f64]| -> ([f64; 3], [f64; 3]) {
        let amp = x[1] / unit;
        let p1 = predict_echoes(amp, x[0], ctx[0]);
        let p2 = predict_echoes(amp, x[0], ctx[1]);
        (
            [p1[0] - y1[0], p1[1] - y1[1], p1[2] - y1[2]],
            [p2[0] - y2[0], p2[1] - y2[1], p2[2] - y2[2]],
        )
    };
    let norm3 = |r: &[f64; 3]| (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();

    let mut x = vec![t2_init, amp_init];
    let mut weights = [1.0f64, 1.0];
    for pass in 0..=cfg.reweight_passes {
        let w = weights;
        let problem = BoxedProblem::new(
            |x: &[f64]| {
                let (r1, r2) = seg_residuals(x);
                r1.iter().map(|v| v * w[0]).chain(r2.iter().map(|v| v * w[1])).collect()
            },
            vec![lo, 0.0],
            vec![hi, f64::INFINITY],
            x.iter().enumerate().map(|(i, &v)| if i == 0 { v.clamp(lo + 1e-12, hi - 1e-12) } else { v.max(1e-12) }).collect(),
        )?;
        let sol = solve_boxed(&problem, opts)?;
        let moved = (sol.params[0] - x[0]).abs() / x[0] + (sol.params[1] - x[1]).abs() / x[1].max(1e-12);
        x = sol.params;
        let (r1, r2) = seg_residuals(&x);
        let (n1, n2) = (norm3(&r1), norm3(&r2));
        if pass > 0 && moved < cfg.tol {
            break;
        }
        // IRLS toward sum of norms: weight each segment by 1/sqrt(norm)
        let floor = 1e-12;
        weights = [1.0 / n1.max(floor).sqrt(), 1.0 / n2.max(floor).sqrt()];
        let wmax = weights[0].max(weights[1]);
        weights = weights.map(|v| v / wmax);
        if n1 + n2 < floor {
            break;
        }
    }
    let (r1, r2) = seg_residuals(&x);
    let t2 = x[0];
    let at_bound = (t2 - lo).abs() <= 1e-6 * lo || (hi - t2).abs() <= 1e-6 * hi;
    Ok(T2Fit {
        t2,
        amp: x[1] / unit * scale,
        cost: (norm3(&r1) + norm3(&r2)) * scale,
        at_bound,
    })
}

/// Complex echo values for the simulator: the actual transverse magnitude
/// profile left by the imaging pulse, refocused onto the phase of `phase_ref`.
pub fn simulate_echoes(
    transverse_z: &[Complex64],
    theta_z: &[f64],
    z: &[f64],
    echo_times: &[f64; 3],
    t2: f64,
    phase_ref: Complex64,
) -> [Complex64; 3] {
    let weight: Vec<f64> = transverse_z.iter().map(|m| m.norm()).collect();
    let ph = if phase_ref.norm() > 0.0 {
        phase_ref / phase_ref.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    echo_train(&weight, theta_z, z, echo_times, t2).map(|v| ph * v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const TIMES: [f64; 3] = [0.012, 0.024, 0.040];

    #[test]
    fn table_values() {
        for n in 1..=3 {
            assert!((f_n(n, PI).unwrap() - 1.0).abs() < 1e-15, "n = {n}");
            assert_eq!(f_n(n, 0.0).unwrap(), 0.0);
        }
        let t = 2.0 * PI / 3.0;
        assert!((f_n(1, t).unwrap() - 0.75).abs() < 1e-12);
        assert!((f_n(2, t).unwrap() - 0.5625).abs() < 1e-12);
        assert!((f_n(3, t).unwrap() - 0.28125).abs() < 1e-12);
        assert!(f_n(0, t).is_err());
        assert!(f_n(4, t).is_err());
    }

    #[test]
    fn ideal_train() {
        let ctx = EchoModelContext::uniform(PI, TIMES);
        let p = predict_echoes(2.0, 0.08, &ctx);
        for n in 0..3 {
            assert!((p[n] - 2.0 * (-TIMES[n] / 0.08).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn no_decay_limit_orders_echoes() {
        let ctx = EchoModelContext::uniform(2.5, TIMES);
        let p = predict_echoes(1.0, f64::INFINITY, &ctx);
        let f: Vec<f64> = (1..=3).map(|n| f_n(n, 2.5).unwrap()).collect();
        for n in 0..3 {
            assert!((p[n] - f[n]).abs() < 1e-12);
        }
        assert!(p[0] > p[1] && p[1] > p[2]);
        let doubled = predict_echoes(2.0, 0.1, &ctx);
        let single = predict_echoes(1.0, 0.1, &ctx);
        for n in 0..3 {
            assert!((doubled[n] - 2.0 * single[n]).abs() < 1e-15);
        }
    }

    #[test]
    fn log_linear_is_exact_for_pure_decay() {
        let (c, t2) = (4.2, 0.055);
        let y = TIMES.map(|t| c * (-t / t2).exp());
        let (t2_hat, c_hat) = log_linear_init(&y, &TIMES).unwrap();
        assert!((t2_hat / t2 - 1.0).abs() < 1e-12);
        assert!((c_hat / c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn synthetic_decay_recovered() {
        let ctx = EchoModelContext::uniform(PI, TIMES);
        let (c, t2) = (3.0, 0.08);
        let y = TIMES.map(|t| c * (-t / t2).exp());
        let fit = fit_t2(&y, &y, [&ctx, &ctx], &T2Config::default()).unwrap();
        assert!((fit.t2 / t2 - 1.0).abs() < 1e-7, "{fit:?}");
        assert!((fit.amp / c - 1.0).abs() < 1e-7);
        assert!(!fit.at_bound);
    }

    #[test]
    fn scale_equivariance() {
        let a = EchoModelContext::uniform(2.7, TIMES);
        let b = EchoModelContext::uniform(2.9, TIMES);
        let y1 = predict_echoes(1.3, 0.06, &a).map(|v| v * 1.01);
        let y2 = predict_echoes(1.3, 0.06, &b).map(|v| v * 0.98);
        let f = fit_t2(&y1, &y2, [&a, &b], &T2Config::default()).unwrap();
        let g = fit_t2(&y1.map(|v| 7.5 * v), &y2.map(|v| 7.5 * v), [&a, &b], &T2Config::default()).unwrap();
        assert!((f.t2 / g.t2 - 1.0).abs() < 1e-6);
        assert!((g.amp / (7.5 * f.amp) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn short_t2_clamps() {
        let ctx = EchoModelContext::uniform(PI, TIMES);
        let y = TIMES.map(|t| (-t / 0.002).exp());
        let fit = fit_t2(&y, &y, [&ctx, &ctx], &T2Config::default()).unwrap();
        assert!(fit.at_bound);
        assert!((fit.t2 - 5e-3).abs() < 1e-9);
    }

    #[test]
    fn zero_echoes_invalid() {
        let ctx = EchoModelContext::uniform(PI, TIMES);
        assert!(fit_t2(&[0.0; 3], &[0.0; 3], [&ctx, &ctx], &T2Config::default()).is_err());
    }
}
