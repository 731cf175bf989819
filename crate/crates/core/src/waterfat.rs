//! Step 3: water, fat, T2* of each species and off-resonance from I1..I5.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitcore::{grid_minimize, lsq_solve, GridSpec, Matrix, Qr};
use crate::seqsim::{SequenceTiming, OMEGA_FAT};

/// Proton gyromagnetic ratio (rad/(s*T)).
pub const GAMMA: f64 = 2.0 * PI * 42.577e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WfConfig {
    pub omega_cs: f64,
    pub gamma: f64,
    /// Half-width of the off-resonance search window around the initial guess (rad/s).
    pub omega_bound: f64,
    pub d_omega_step: f64,
    /// `[min, max]` of the log-spaced T2* axes (seconds).
    pub t2s_water_range: [f64; 2],
    pub t2s_fat_range: [f64; 2],
    pub t2s_points: usize,
    /// Acquisition times of I1..I5.
    pub times: [f64; 5],
}

impl Default for WfConfig {
    fn default() -> Self {
        let t = SequenceTiming::default().acq_times;
        Self {
            omega_cs: OMEGA_FAT,
            gamma: GAMMA,
            omega_bound: 2.0 * PI * 60.0,
            d_omega_step: 2.0 * PI,
            t2s_water_range: [3e-3, 0.15],
            t2s_fat_range: [3e-3, 0.15],
            t2s_points: 40,
            times: [t[0], t[1], t[2], t[3], t[4]],
        }
    }
}

pub fn log_space(range: [f64; 2], n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![range[0]],
        _ => {
            let (a, b) = (range[0].ln(), range[1].ln());
            (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
        }
    }
}

impl WfConfig {
    pub fn with_times(mut self, timing: &SequenceTiming) -> Self {
        self.times.copy_from_slice(&timing.acq_times[..5]);
        self
    }

    pub fn t2s_water_axis(&self) -> Vec<f64> {
        log_space(self.t2s_water_range, self.t2s_points)
    }

    pub fn t2s_fat_axis(&self) -> Vec<f64> {
        log_space(self.t2s_fat_range, self.t2s_points)
    }

    /// Offsets `j * step` with `|j * step| < omega_bound`.
    pub fn d_omega_offsets(&self) -> Result<Vec<f64>> {
        if !(self.d_omega_step > 0.0) || !(self.omega_bound >= self.d_omega_step) {
            return Err(Error::Config(format!(
                "off-resonance window {} rad/s holds no step of {} rad/s",
                self.omega_bound, self.d_omega_step
            )));
        }
        let mut j = (self.omega_bound / self.d_omega_step).floor() as i64;
        if j as f64 * self.d_omega_step >= self.omega_bound {
            j -= 1;
        }
        Ok((-j..=j).map(|i| i as f64 * self.d_omega_step).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.t2s_points == 0 {
            return Err(Error::Config("T2* grids are empty".into()));
        }
        for r in [self.t2s_water_range, self.t2s_fat_range] {
            if !(r[0] > 0.0 && r[1] >= r[0]) || (self.t2s_points > 1 && r[1] == r[0]) {
                return Err(Error::Config(format!("bad T2* range {r:?}")));
            }
        }
        if !(self.gamma > 0.0) {
            return Err(Error::Config("gamma must be positive".into()));
        }
        if !(self.times[0] > 0.0) || self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("acquisition times must be positive and increasing".into()));
        }
        // fat indistinguishable from water when the shift wraps to zero at every sample
        let t0 = self.times[0];
        let degenerate = self.times.iter().all(|&t| {
            let cycles = self.omega_cs * (t - t0) / (2.0 * PI);
            (cycles - cycles.round()).abs() < 1e-9
        });
        if degenerate {
            return Err(Error::Config("chemical shift aliases to zero at every echo; water and fat are not separable".into()));
        }
        self.d_omega_offsets()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WfEstimate {
    pub w: Complex64,
    pub f: Complex64,
    pub t2s_water: f64,
    pub t2s_fat: f64,
    pub d_omega0: f64,
    pub fat_fraction: f64,
    pub residual: f64,
    /// The off-resonance initial guess had no phase to work from.
    pub low_confidence: bool,
}

/// Phase-difference off-resonance guess; `(0, true)` when either sample is zero.
pub fn init_offres(i1: Complex64, i3: Complex64, dt13: f64) -> Result<(f64, bool)> {
    if !(dt13 > 0.0) {
        return Err(Error::InvalidArgument("dt13 must be positive".into()));
    }
    if i1.norm() == 0.0 || i3.norm() == 0.0 {
        return Ok((0.0, true));
    }
    Ok(((i3 * i1.conj()).arg() / dt13, false))
}

pub fn delta_b0(d_omega0: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument("gamma must be positive".into()));
    }
    Ok(d_omega0 / gamma)
}

fn design(d_omega0: f64, t2sw: f64, t2sf: f64, omega_cs: f64, times: &[f64; 5]) -> Matrix<Complex64> {
    Matrix::from_fn(5, 2, |m, j| {
        let t = times[m];
        let phase = Complex64::from_polar(1.0, d_omega0 * t);
        if j == 0 {
            phase * (-t / t2sw).exp()
        } else {
            phase * Complex64::from_polar((-t / t2sf).exp(), omega_cs * t)
        }
    })
}

/// Linear least-squares `(W, F)` for one candidate; also reports the residual
/// norm and whether the design was rank deficient.
pub fn wf_design_solve(
    d_omega0: f64,
    t2sw: f64,
    t2sf: f64,
    cfg: &WfConfig,
    data: &[Complex64; 5],
) -> Result<(Complex64, Complex64, f64, bool)> {
    let a = design(d_omega0, t2sw, t2sf, cfg.omega_cs, &cfg.times);
    let sol = lsq_solve(&a, data)?;
    Ok((sol.x[0], sol.x[1], sol.residual_norm, sol.rank_deficient))
}

/// Grid search with the per-(T2*w, T2*f) factorizations computed once.
///
/// The off-resonance factor is common to both columns, so for a candidate
/// `d_omega` the residual equals that of the off-resonance-free design applied
/// to the demodulated data `b_m exp(-i d_omega t_m)`.
#[derive(Clone, Debug)]
pub struct WfSolver {
    cfg: WfConfig,
    t2w: Vec<f64>,
    t2f: Vec<f64>,
    offsets: Vec<f64>,
    /// Last three rows of `Q^H` for each `(T2*w, T2*f)` pair: a basis of the
    /// orthogonal complement of the design's column space.
    complement: Vec<[[Complex64; 5]; 3]>,
}

impl WfSolver {
    pub fn new(cfg: &WfConfig) -> Result<Self> {
        cfg.validate()?;
        let t2w = cfg.t2s_water_axis();
        let t2f = cfg.t2s_fat_axis();
        let zero = Complex64::new(0.0, 0.0);
        let mut complement = Vec::with_capacity(t2w.len() * t2f.len());
        for &tw in &t2w {
            for &tf in &t2f {
                let qr = Qr::new(&design(0.0, tw, tf, cfg.omega_cs, &cfg.times))?;
                let rank = qr.rank();
                let mut qh = [[zero; 5]; 5];
                for m in 0..5 {
                    let mut e = [zero; 5];
                    e[m] = Complex64::new(1.0, 0.0);
                    qr.apply_qh(&mut e);
                    for (r, v) in e.iter().enumerate() {
                        qh[r][m] = *v;
                    }
                }
                let mut rows = [[zero; 5]; 3];
                for (slot, r) in (2..5).enumerate() {
                    rows[slot] = qh[r];
                }
                if rank < 2 {
                    return Err(Error::Config(format!(
                        "water/fat design is rank deficient at T2*w = {tw}, T2*f = {tf}"
                    )));
                }
                complement.push(rows);
            }
        }
        Ok(Self {
            cfg: cfg.clone(),
            t2w,
            t2f,
            offsets: cfg.d_omega_offsets()?,
            complement,
        })
    }

    pub fn config(&self) -> &WfConfig {
        &self.cfg
    }

    pub fn fit(&self, data: &[Complex64; 5]) -> Result<WfEstimate> {
        if data.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidArgument("water/fat data must be finite".into()));
        }
        let t = &self.cfg.times;
        let (init, low_confidence) = init_offres(data[0], data[2], t[2] - t[0])?;
        let d_axis: Vec<f64> = self.offsets.iter().map(|o| init + o).collect();
        let spec = GridSpec::new(vec![d_axis.clone(), self.t2w.clone(), self.t2f.clone()])?;
        let nf = self.t2f.len();
        let mut cached = usize::MAX;
        let mut demod = [Complex64::new(0.0, 0.0); 5];
        let best = grid_minimize(&spec, |idx, point| {
            if idx[0] != cached {
                cached = idx[0];
                for m in 0..5 {
                    demod[m] = data[m] * Complex64::from_polar(1.0, -point[0] * t[m]);
                }
            }
            let rows = &self.complement[idx[1] * nf + idx[2]];
            rows.iter()
                .map(|row| row.iter().zip(&demod).map(|(q, d)| q * d).sum::<Complex64>().norm_sqr())
                .sum::<f64>()
        })?;
        let (d_omega0, t2sw, t2sf) = (best.point[0], best.point[1], best.point[2]);
        let (w, f, residual, _) = wf_design_solve(d_omega0, t2sw, t2sf, &self.cfg, data)?;
        let total = w.norm() + f.norm();
        Ok(WfEstimate {
            w,
            f,
            t2s_water: t2sw,
            t2s_fat: t2sf,
            d_omega0,
            fat_fraction: if total > 0.0 { f.norm() / total } else { 0.0 },
            residual,
            low_confidence,
        })
    }
}

pub fn fit_waterfat(data: &[Complex64; 5], cfg: &WfConfig) -> Result<WfEstimate> {
    WfSolver::new(cfg)?.fit(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn forward(w: Complex64, f: Complex64, t2w: f64, t2f: f64, dw: f64, cfg: &WfConfig) -> [Complex64; 5] {
        let a = design(dw, t2w, t2f, cfg.omega_cs, &cfg.times);
        let v = a.mul_vec(&[w, f]);
        [v[0], v[1], v[2], v[3], v[4]]
    }

    fn coarse() -> WfConfig {
        WfConfig {
            t2s_points: 8,
            omega_bound: 2.0 * PI * 10.0,
            ..WfConfig::default()
        }
    }

    #[test]
    fn init_examples() {
        let one = Complex64::new(1.0, 0.0);
        let (v, low) = init_offres(one, Complex64::from_polar(1.0, 0.5), 4e-3).unwrap();
        assert!((v - 125.0).abs() < 1e-9 && !low);
        let z = Complex64::new(0.3, -2.0);
        assert_eq!(init_offres(z, z, 4e-3).unwrap().0, 0.0);
        assert_eq!(init_offres(Complex64::new(0.0, 0.0), z, 4e-3).unwrap(), (0.0, true));
        assert!(init_offres(one, one, 0.0).is_err());
    }

    #[test]
    fn b0_conversion() {
        assert_eq!(delta_b0(0.0, GAMMA).unwrap(), 0.0);
        assert!((delta_b0(GAMMA, GAMMA).unwrap() - 1.0).abs() < 1e-15);
        let b = delta_b0(2.0 * PI * 63.87, GAMMA).unwrap();
        assert!((b - 1.5e-6).abs() < 1e-9);
        assert!(delta_b0(1.0, 0.0).is_err());
    }

    #[test]
    fn exact_candidate_is_exact() {
        let cfg = WfConfig::default();
        let (w, f) = (Complex64::new(0.7, 0.2), Complex64::new(-0.1, 0.4));
        let data = forward(w, f, 0.04, 0.02, 30.0, &cfg);
        let (wh, fh, res, rd) = wf_design_solve(30.0, 0.04, 0.02, &cfg, &data).unwrap();
        let scale = data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!(!rd);
        assert!(res < 1e-9 * scale);
        assert!((wh - w).norm() < 1e-9 && (fh - f).norm() < 1e-9);
        let water = forward(w, Complex64::new(0.0, 0.0), 0.04, 0.02, 30.0, &cfg);
        let (wh, fh, _, _) = wf_design_solve(30.0, 0.04, 0.02, &cfg, &water).unwrap();
        assert!(fh.norm() < 1e-9 * wh.norm());
        let (wz, fz, rz, _) = wf_design_solve(30.0, 0.04, 0.02, &cfg, &[Complex64::new(0.0, 0.0); 5]).unwrap();
        assert_eq!((wz.norm(), fz.norm(), rz), (0.0, 0.0, 0.0));
    }

    #[test]
    fn grid_fit_on_grid_truth() {
        let cfg = coarse();
        let solver = WfSolver::new(&cfg).unwrap();
        let (t2w, t2f) = (cfg.t2s_water_axis()[5], cfg.t2s_fat_axis()[3]);
        // water only: the phase-difference guess is exact, so the truth is a grid point
        let water = forward(Complex64::new(0.6, 0.2), Complex64::new(0.0, 0.0), t2w, t2f, 25.0, &cfg);
        let e = solver.fit(&water).unwrap();
        assert!((e.d_omega0 - 25.0).abs() < 1e-9 && e.t2s_water == t2w, "{e:?}");
        assert!(e.fat_fraction < 1e-9 && e.residual < 1e-12);
        let mixed = forward(Complex64::new(0.6, 0.0), Complex64::new(0.4, 0.0), t2w, t2f, 0.0, &cfg);
        let e = solver.fit(&mixed).unwrap();
        assert!((e.fat_fraction - 0.4).abs() < 0.01, "{e:?}");
        // global complex scaling leaves the fraction unchanged
        let s = Complex64::from_polar(3.5, 1.1);
        let g = solver.fit(&mixed.map(|v| v * s)).unwrap();
        assert!((g.fat_fraction - e.fat_fraction).abs() < 1e-9);
    }

    #[test]
    fn matches_brute_force_over_whole_grid() {
        let cfg = coarse();
        let solver = WfSolver::new(&cfg).unwrap();
        let data = forward(Complex64::new(0.9, 0.1), Complex64::new(0.2, -0.1), 0.03, 0.011, 2.0 * PI * 4.0, &cfg);
        let e = solver.fit(&data).unwrap();
        let (init, _) = init_offres(data[0], data[2], cfg.times[2] - cfg.times[0]).unwrap();
        // oracle: full lsq at every triple of a wider window
        let mut best = (f64::INFINITY, 0.0, 0.0, 0.0);
        for j in -30..=30 {
            let dw = init + j as f64 * cfg.d_omega_step;
            for &tw in &cfg.t2s_water_axis() {
                for &tf in &cfg.t2s_fat_axis() {
                    let (_, _, r, _) = wf_design_solve(dw, tw, tf, &cfg, &data).unwrap();
                    if r < best.0 {
                        best = (r, dw, tw, tf);
                    }
                }
            }
        }
        assert!((e.d_omega0 - best.1).abs() < 1e-9, "{e:?} {best:?}");
        assert_eq!((e.t2s_water, e.t2s_fat), (best.2, best.3));
        assert!((e.residual - best.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_and_empty_configs() {
        let mut cfg = WfConfig::default();
        cfg.times = [1.0, 2.0, 3.0, 4.0, 5.0].map(|i| i * 2.0 * PI / cfg.omega_cs.abs());
        assert!(matches!(WfSolver::new(&cfg), Err(Error::Config(_))));
        let cfg = WfConfig {
            omega_bound: 1.0,
            ..WfConfig::default()
        };
        assert!(matches!(WfSolver::new(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn offsets_are_strictly_inside_window() {
        let o = WfConfig::default().d_omega_offsets().unwrap();
        assert_eq!(o.len(), 119);
        assert!(o.iter().all(|v| v.abs() < 2.0 * PI * 60.0));
    }
}
