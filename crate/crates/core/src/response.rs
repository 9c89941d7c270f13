//! Linear response of the quasi-steady state to a weak periodic modulation
//! of the tunneling rate or the energy bias (non-interacting condensate).
//!
//! The driven dynamics are `dv/dt = −(M0 + M1 cos ωt) v`. Writing
//! `v = (v0 + Re(v1 e^{iωt})) e^{−κt}` and keeping first order in `M1`
//! gives `[M0 + (iω − κ)] v1 = −M1 v0`.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::meanfield::{BlochState, DriveKind, DriveSpec, MeanFieldError};
use crate::model::ModelParams;
use crate::ode::{Dopri5, OdeError, Tolerances};
use crate::steadystate::{decay_matrix_with, linear_decay_modes, select_physical, DecayModeSolution, SteadyError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResponseError {
    #[error(transparent)]
    Steady(#[from] SteadyError),
    #[error(transparent)]
    MeanField(#[from] MeanFieldError),
    #[error("drive frequency hits a decay mode: iω − κ = {0} is (nearly) an eigenvalue of −M0")]
    ResonanceSingularity(Complex64),
    #[error("linear response is derived for U = 0 (got U = {0})")]
    Interacting(f64),
    #[error("time-domain integration failed at t = {t}: {source}")]
    Integration { t: f64, source: OdeError },
    #[error("drive frequency must be positive for a time-domain measurement")]
    ZeroFrequency,
}

/// Quasi-steady state plus its first-order forced oscillation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseSolution {
    pub kind: DriveKind,
    pub omega: f64,
    pub kappa: f64,
    pub s0: [f64; 3],
    pub n0: f64,
    pub s1: [Complex64; 3],
    pub n1: Complex64,
    /// Oscillation amplitude of `s_z/n` (tunneling drive) or `s_x/n` (bias
    /// drive) to first order in the drive.
    pub response: f64,
}

impl ResponseSolution {
    /// First-order amplitude of the ratio `s_j/n` at the drive frequency.
    pub fn ratio_amplitude(&self, component: usize) -> f64 {
        let ratio = self.s0[component] / self.n0;
        ((self.s1[component] - self.n1 * ratio) / self.n0).norm()
    }
}

/// Drive frequency `√(J0² + ε²)`.
pub fn resonance_frequency(j0: f64, epsilon: f64) -> f64 {
    j0.hypot(epsilon)
}

fn solve_response(
    params: &ModelParams,
    j0: f64,
    m1: &DMatrix<f64>,
    omega: f64,
    kind: DriveKind,
) -> Result<ResponseSolution, ResponseError> {
    if params.u != 0.0 {
        return Err(ResponseError::Interacting(params.u));
    }
    let p0 = params.with_j(j0);
    let mode: DecayModeSolution = select_physical(&linear_decay_modes(&p0))?;
    let kappa = mode.kappa.re;
    let m0 = decay_matrix_with(&p0, j0, p0.epsilon);
    let shift = Complex64::new(-kappa, omega);
    let a = m0.map(|x| Complex64::new(x, 0.0)) + DMatrix::<Complex64>::identity(4, 4) * shift;
    let v0 = DVector::from_column_slice(&[mode.s0[0], mode.s0[1], mode.s0[2], mode.n0]);
    let rhs = (-(m1 * v0)).map(|x| Complex64::new(x, 0.0));
    let sv = a.singular_values();
    let smax = sv.max();
    if sv.min() <= 1e-13 * smax.max(1e-300) {
        return Err(ResponseError::ResonanceSingularity(shift));
    }
    let v1 = a.lu().solve(&rhs).ok_or(ResponseError::ResonanceSingularity(shift))?;
    let mut sol = ResponseSolution {
        kind,
        omega,
        kappa,
        s0: mode.s0,
        n0: mode.n0,
        s1: [v1[0], v1[1], v1[2]],
        n1: v1[3],
        response: 0.0,
    };
    sol.response = match kind {
        DriveKind::Bias => sol.ratio_amplitude(0),
        _ => sol.ratio_amplitude(2),
    };
    Ok(sol)
}

/// Response to `J(t) = J0 + J1 cos ωt` (bias fixed at `params.epsilon`).
pub fn response_tunneling(params: &ModelParams, j0: f64, j1: f64, omega: f64) -> Result<ResponseSolution, ResponseError> {
    let mut m1 = DMatrix::zeros(4, 4);
    m1[(1, 2)] = -2.0 * j1;
    m1[(2, 1)] = 2.0 * j1;
    solve_response(params, j0, &m1, omega, DriveKind::Tunneling)
}

/// Response to `ε(t) = ε0 + ε1 cos ωt` with `ε0 = params.epsilon`.
pub fn response_bias(params: &ModelParams, j0: f64, eps1: f64, omega: f64) -> Result<ResponseSolution, ResponseError> {
    let mut m1 = DMatrix::zeros(4, 4);
    m1[(0, 1)] = 2.0 * eps1;
    m1[(1, 0)] = -2.0 * eps1;
    solve_response(params, j0, &m1, omega, DriveKind::Bias)
}

/// Drive used when sweeping a response surface: the tunneling amplitude is
/// a fixed fraction of `J0`, the bias amplitude is absolute. The drive
/// frequency is `√(J0² + ε²)` at every cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SurfaceDrive {
    Tunneling { ratio: f64 },
    Bias { eps1: f64 },
}

/// Response values on a `J0 × T1⁻¹` grid; `None` marks failed cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseSurface {
    pub j0: Vec<f64>,
    pub t1_inv: Vec<f64>,
    pub kind: DriveKind,
    /// `values[i][k]` belongs to `j0[i]`, `t1_inv[k]`.
    pub values: Vec<Vec<Option<f64>>>,
}

pub fn response_at(params: &ModelParams, j0: f64, t1_inv: f64, drive: SurfaceDrive) -> Result<ResponseSolution, ResponseError> {
    let p = params.with_t1_inv(t1_inv);
    let omega = resonance_frequency(j0, p.epsilon);
    match drive {
        SurfaceDrive::Tunneling { ratio } => response_tunneling(&p, j0, ratio * j0, omega),
        SurfaceDrive::Bias { eps1 } => response_bias(&p, j0, eps1, omega),
    }
}

pub fn response_surface(params: &ModelParams, j0_grid: &[f64], t1_inv_grid: &[f64], drive: SurfaceDrive) -> ResponseSurface {
    use rayon::prelude::*;
    let values = j0_grid
        .par_iter()
        .map(|&j0| {
            t1_inv_grid
                .iter()
                .map(|&t1| response_at(params, j0, t1, drive).ok().map(|r| r.response))
                .collect()
        })
        .collect();
    ResponseSurface {
        j0: j0_grid.to_vec(),
        t1_inv: t1_inv_grid.to_vec(),
        kind: match drive {
            SurfaceDrive::Tunneling { .. } => DriveKind::Tunneling,
            SurfaceDrive::Bias { .. } => DriveKind::Bias,
        },
        values,
    }
}

impl ResponseSurface {
    /// CSV `J0,T1_inv,omega,response,kind`; masked cells have an empty
    /// response field.
    pub fn write_csv<W: Write>(&self, epsilon: f64, mut w: W) -> io::Result<()> {
        writeln!(w, "J0,T1_inv,omega,response,kind")?;
        let kind = match self.kind {
            DriveKind::Bias => "bias",
            DriveKind::Tunneling => "tunneling",
            DriveKind::None => "none",
        };
        for (i, &j0) in self.j0.iter().enumerate() {
            for (k, &t1) in self.t1_inv.iter().enumerate() {
                let value = self.values[i][k].map(|v| v.to_string()).unwrap_or_default();
                writeln!(w, "{},{},{},{},{}", j0, t1, resonance_frequency(j0, epsilon), value, kind)?;
            }
        }
        Ok(())
    }
}

/// Fourier coefficients `c_k` (k = 0, 1, 2) of the ratios `s_j/n` measured on
/// a driven mean-field trajectory, so that `s_j/n ≈ Σ Re(c_k e^{ikωt})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioSpectrum {
    pub harmonics: [[Complex64; 3]; 3],
    /// Length of the discarded transient.
    pub t_discard: f64,
}

impl RatioSpectrum {
    pub fn amplitude(&self, component: usize, harmonic: usize) -> f64 {
        self.harmonics[component][harmonic].norm()
    }
}

/// Integrate the driven (non-interacting) Bloch equations from the undriven
/// quasi-steady state, discard `max(5/gap, 5 periods)` where `gap` is the
/// relaxation rate towards the slowest mode, and Fourier-analyze `s/n` over
/// `periods` further drive periods.
///
/// The trajectory is rescaled by `n` after every period; the equations are
/// linear in `(s, n)`, so the ratios are unaffected.
pub fn time_domain_spectrum(params: &ModelParams, drive: &DriveSpec, periods: usize) -> Result<RatioSpectrum, ResponseError> {
    drive.validate()?;
    if !(drive.omega > 0.0) {
        return Err(ResponseError::ZeroFrequency);
    }
    let p0 = params.with_j(drive.j0).with_epsilon(drive.eps0);
    let modes = linear_decay_modes(&p0);
    let slow = select_physical(&modes)?;
    let gap = modes
        .iter()
        .filter(|m| m.kappa != slow.kappa || !m.physical)
        .map(|m| m.kappa.re - slow.kappa.re)
        .filter(|g| *g > 1e-9)
        .fold(f64::INFINITY, f64::min);
    let period = 2.0 * std::f64::consts::PI / drive.omega;
    let t_discard = (5.0 / gap).max(5.0 * period);
    let skip_periods = (t_discard / period).ceil() as usize;

    let r = p0.rates();
    let (t1, t2, fa) = (r.t1_inv, r.t2_inv, r.f_a);
    let d = *drive;
    let rhs = move |t: f64, y: &[f64], dy: &mut [f64]| {
        let c = (d.omega * t).cos();
        let j = d.j0 + d.j1 * c;
        let e = d.eps0 + d.eps1 * c;
        dy[0] = -2.0 * e * y[1] - t2 * y[0];
        dy[1] = 2.0 * j * y[2] + 2.0 * e * y[0] - t2 * y[1];
        dy[2] = -2.0 * j * y[1] - t1 * y[2] - t1 * fa * y[3];
        dy[3] = -t1 * y[3] - t1 * fa * y[2];
    };
    let start = BlochState::new(slow.s0[0], slow.s0[1], slow.s0[2], slow.n0);
    let tol = Tolerances { rtol: 1e-11, atol: 1e-14 };
    let mut solver = Dopri5::new(rhs, 0.0, start.to_array().to_vec(), tol);
    let samples = 256;
    let mut harmonics = [[Complex64::new(0.0, 0.0); 3]; 3];
    for k in 0..skip_periods + periods {
        let t_start = k as f64 * period;
        for m in 1..=samples {
            let t = t_start + period * m as f64 / samples as f64;
            solver
                .integrate_to(t, 10_000_000)
                .map_err(|source| ResponseError::Integration { t: solver.t(), source })?;
            if k >= skip_periods {
                let y = solver.y();
                for (h, row) in harmonics.iter_mut().enumerate() {
                    let phase = Complex64::from_polar(1.0, -(h as f64) * drive.omega * t);
                    for (c, slot) in row.iter_mut().enumerate() {
                        *slot += phase * (y[c] / y[3]);
                    }
                }
            }
        }
        let y: Vec<f64> = solver.y().to_vec();
        let n = y[3];
        let scaled: Vec<f64> = y.iter().map(|v| v / n).collect();
        solver.reset(solver.t(), &scaled);
    }
    let total = (samples * periods) as f64;
    let mut out = [[Complex64::new(0.0, 0.0); 3]; 3];
    for (c, row) in out.iter_mut().enumerate() {
        for (h, slot) in row.iter_mut().enumerate() {
            let factor = if h == 0 { 1.0 } else { 2.0 };
            *slot = harmonics[h][c] * (factor / total);
        }
    }
    Ok(RatioSpectrum { harmonics: out, t_discard })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fig7(t1: f64) -> ModelParams {
        ModelParams::from_loss(0.0, 0.0, 0.0, 5.0, t1, 0.5).unwrap()
    }

    #[test]
    fn resonance_frequency_examples() {
        assert_eq!(resonance_frequency(3.0, 4.0), 5.0);
        assert_eq!(resonance_frequency(1.5, 0.0), 1.5);
        assert_eq!(resonance_frequency(0.0, 0.0), 0.0);
    }

    #[test]
    fn no_drive_no_response() {
        let r = response_tunneling(&fig7(2.0), 1.5, 0.0, 1.5).unwrap();
        assert!(r.s1.iter().all(|z| z.norm() == 0.0));
        assert_eq!(r.n1.norm(), 0.0);
        let r = response_bias(&fig7(2.0), 1.5, 0.0, 1.5).unwrap();
        assert_eq!(r.response, 0.0);
    }

    #[test]
    fn bias_drive_leaves_imbalance_alone() {
        let r = response_bias(&fig7(4.0), 2.0, 1.0, 2.0).unwrap();
        let norm = r.s1.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(norm > 0.0);
        assert!(r.s1[1].norm() <= 1e-12 * norm);
        assert!(r.s1[2].norm() <= 1e-12 * norm);
    }

    #[test]
    fn response_is_linear_in_amplitude() {
        let a = response_tunneling(&fig7(2.0), 2.5, 0.05, 2.5).unwrap().response;
        let b = response_tunneling(&fig7(2.0), 2.5, 0.2, 2.5).unwrap().response;
        assert_relative_eq!(b / a, 4.0, max_relative = 1e-8);
    }

    #[test]
    fn interacting_rejected() {
        let p = fig7(2.0).with_u(0.1);
        assert!(matches!(response_tunneling(&p, 1.0, 0.1, 1.0), Err(ResponseError::Interacting(_))));
    }

    #[test]
    fn single_cell_surface() {
        let s = response_surface(&fig7(2.0), &[2.0], &[2.0], SurfaceDrive::Tunneling { ratio: 0.1 });
        assert_eq!(s.values.len(), 1);
        assert_eq!(s.values[0].len(), 1);
        assert!(s.values[0][0].is_some());
    }
}
