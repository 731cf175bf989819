//! Step 4: T1 and M0 from the saturation-recovery block (two probes and the
//! imaging pulse).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bloch::{integrate_slice, SliceProfile};
use crate::error::{Error, Result};
use crate::fitcore::{multi_start, BoxedProblem, SolverOptions};

/// Longitudinal magnetization left by an imperfect saturation pulse.
pub fn residual_mz0(w_mag: f64, f_mag: f64, k: f64, sat_flip: f64) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::InvalidArgument(format!("b1 scale {k} must be positive")));
    }
    if !(sat_flip > 0.0 && sat_flip <= std::f64::consts::FRAC_PI_2) {
        return Err(Error::InvalidArgument(format!("saturation flip {sat_flip} is outside (0, pi/2]")));
    }
    if sat_flip == std::f64::consts::FRAC_PI_2 {
        return Ok(0.0);
    }
    Ok((w_mag + f_mag) / (k * sat_flip.tan()))
}

/// Transverse magnetization per z right after each of the three pulses of the
/// recovery block. `pulses` holds `(time since saturation, profile)`; `Mz`
/// starts uniform at `mz0`, recovers toward `m0` between pulses and is scaled
/// by each pulse's `R_zz(z)`. Transverse magnetization is spoiled before the
/// next pulse.
pub fn recovery_transverse(
    t1: f64,
    m0: f64,
    mz0: f64,
    pulses: [(f64, &SliceProfile); 3],
) -> [Vec<Complex64>; 3] {
    let n = pulses[0].1.z_samples.len();
    let mut mz = vec![mz0; n];
    let mut t_prev = 0.0;
    pulses.map(|(t, profile)| {
        let e1 = (-(t - t_prev) / t1).exp();
        t_prev = t;
        for m in mz.iter_mut() {
            *m = *m * e1 + m0 * (1.0 - e1);
        }
        let mxy = profile.excite(&mz);
        for (m, r) in mz.iter_mut().zip(&profile.rotations) {
            *m *= r[2][2];
        }
        mxy
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct T1Context {
    pub probe_profile: SliceProfile,
    pub imaging_profile: SliceProfile,
    /// Times of the two probes and the imaging pulse, seconds since saturation.
    pub times: [f64; 3],
    pub mz0: f64,
    /// Multiplies each predicted magnitude (T2* and chemical-shift weighting at
    /// the acquisition echo time).
    pub echo_weight: [f64; 3],
    pub t1_bounds: (f64, f64),
    pub m0_bounds: (f64, f64),
}

impl T1Context {
    pub fn new(probe_profile: SliceProfile, imaging_profile: SliceProfile, times: [f64; 3], mz0: f64) -> Result<Self> {
        let ctx = Self {
            probe_profile,
            imaging_profile,
            times,
            mz0,
            echo_weight: [1.0; 3],
            t1_bounds: (0.05, 5.0),
            m0_bounds: (0.0, f64::INFINITY),
        };
        ctx.validate()?;
        Ok(ctx)
    }

    pub fn validate(&self) -> Result<()> {
        if self.probe_profile.z_samples != self.imaging_profile.z_samples {
            return Err(Error::DimensionMismatch("probe and imaging profiles use different z grids".into()));
        }
        let t = self.times;
        if !(t[0] > 0.0 && t[0] < t[1] && t[1] < t[2]) {
            return Err(Error::InvalidArgument("recovery times must be positive and increasing".into()));
        }
        let (lo, hi) = self.t1_bounds;
        if !(lo > 0.0 && hi > lo) || !(self.m0_bounds.0 >= 0.0 && self.m0_bounds.1 > self.m0_bounds.0) {
            return Err(Error::InvalidArgument("bounds must be positive and ordered".into()));
        }
        if !self.mz0.is_finite() || self.echo_weight.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidArgument("mz0 and echo weights must be finite, weights positive".into()));
        }
        Ok(())
    }
}

/// Magnitudes of the probe and imaging acquisitions for `(t1, m0)`.
pub fn predict_probe_signals(t1: f64, m0: f64, ctx: &T1Context) -> [f64; 3] {
    let pulses = [
        (ctx.times[0], &ctx.probe_profile),
        (ctx.times[1], &ctx.probe_profile),
        (ctx.times[2], &ctx.imaging_profile),
    ];
    let mxy = recovery_transverse(t1, m0, ctx.mz0, pulses);
    let z = &ctx.probe_profile.z_samples;
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = ctx.echo_weight[i] * integrate_slice(&mxy[i], z).expect("matching z grid").norm();
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct T1Config {
    /// Multi-start T1 values (seconds).
    pub starts: Vec<f64>,
    pub t1_min: f64,
    pub t1_max: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub sat_flip: f64,
}

impl Default for T1Config {
    fn default() -> Self {
        Self {
            starts: vec![0.1, 0.3, 0.8, 1.5, 3.0],
            t1_min: 0.05,
            t1_max: 5.0,
            max_iter: 200,
            tol: 1e-12,
            sat_flip: std::f64::consts::FRAC_PI_2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct T1Fit {
    pub t1: f64,
    pub m0: f64,
    pub t1_over_m0: f64,
    pub cost: f64,
    pub at_bound: bool,
}

/// Multi-start bounded fit of `(T1, M0)`.
pub fn fit_t1_m0(measured: &[f64; 3], ctx: &T1Context, starts: &[f64], opts: SolverOptions) -> Result<T1Fit> {
    ctx.validate()?;
    if measured.iter().any(|m| !m.is_finite() || *m < 0.0) {
        return Err(Error::InvalidArgument("measurements must be finite and non-negative".into()));
    }
    if starts.is_empty() {
        return Err(Error::InvalidArgument("at least one T1 start is required".into()));
    }
    let scale = measured.iter().copied().fold(0.0f64, f64::max);
    if scale == 0.0 {
        return Err(Error::Numerical("all recovery measurements are zero".into()));
    }
    // work with m0 in units of the data maximum
    let y = measured.map(|v| v / scale);
    let scaled_ctx = T1Context {
        mz0: ctx.mz0 / scale,
        ..ctx.clone()
    };
    let (lo, hi) = ctx.t1_bounds;
    let (m_lo, m_hi) = (ctx.m0_bounds.0 / scale, ctx.m0_bounds.1 / scale);
    let problem = BoxedProblem::new(
        |x: &[f64]| {
            let p = predict_probe_signals(x[0], x[1], &scaled_ctx);
            (0..3).map(|i| p[i] - y[i]).collect()
        },
        vec![lo, m_lo],
        vec![hi, m_hi],
        vec![0.5 * (lo + hi), 1.0],
    )?;
    let pad = 1e-9 * (hi - lo);
    let start_points: Vec<Vec<f64>> = starts
        .iter()
        .map(|&t1| {
            let t1 = t1.clamp(lo + pad, hi - pad);
            // closed-form M0 for this T1: the model is linear in m0 when mz0 = 0
            let unit = predict_probe_signals(t1, 1.0, &T1Context { mz0: 0.0, ..scaled_ctx.clone() });
            let num: f64 = unit.iter().zip(&y).map(|(u, v)| u * v).sum();
            let den: f64 = unit.iter().map(|u| u * u).sum();
            let m0 = if den > 0.0 { num / den } else { 1.0 };
            vec![t1, m0.clamp(m_lo + 1e-9, if m_hi.is_finite() { m_hi - 1e-9 } else { f64::MAX })]
        })
        .collect();
    let sol = multi_start(&problem, &start_points, opts)?;
    let t1 = sol.params[0];
    let m0 = sol.params[1] * scale;
    let at_bound = (t1 - lo).abs() <= 1e-6 * lo || (hi - t1).abs() <= 1e-6 * hi;
    Ok(T1Fit {
        t1,
        m0,
        t1_over_m0: t1 / m0,
        cost: sol.cost.sqrt() * scale,
        at_bound,
    })
}
