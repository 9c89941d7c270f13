//! Quasi-steady decay modes `v(t) = v0 e^{-κt}` of the Bloch equations.
//!
//! Sign convention: the linearized dynamics read `dv/dt = -M v`, so a decay
//! mode solves `M v0 = κ v0`.

use std::io::{self, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{eigenpairs, polynomial_roots, relative_residual};
use crate::meanfield::{bloch_rhs, BlochState, DriveSpec};
use crate::model::ModelParams;
use crate::series::ObservableSeries;

const PHYS_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SteadyError {
    #[error("no physical decay mode among kappa = {}", format_kappas(.0))]
    NoPhysicalMode(Vec<Complex64>),
    #[error("closed form requires epsilon = 0 (got {0})")]
    NonzeroBias(f64),
    #[error("closed form is singular: {0}")]
    Singular(&'static str),
    #[error("no stochastic resonance without loss asymmetry (f_a = 0)")]
    NoResonance,
    #[error("no critical particle number without interaction (U = 0)")]
    NoInteraction,
    #[error("particle number must be positive, got {0}")]
    InvalidParticleNumber(f64),
    #[error("no physical quasi-steady state at n = {0}")]
    NoBranch(f64),
    #[error("invalid time span or grid: {0}")]
    InvalidGrid(&'static str),
}

fn format_kappas(k: &[Complex64]) -> String {
    let parts: Vec<String> = k.iter().map(|z| format!("{:.6}{:+.6}i", z.re, z.im)).collect();
    format!("[{}]", parts.join(", "))
}

/// One decay mode. For physical modes `n0 = 1` and `s0` is the Bloch
/// direction per particle; otherwise `(s0, n0)` are the real parts of the
/// unit-norm eigenvector and `alpha` is NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayModeSolution {
    pub kappa: Complex64,
    pub s0: [f64; 3],
    pub n0: f64,
    pub alpha: f64,
    pub physical: bool,
    /// False when the root polish or eigen-residual missed its tolerance.
    pub converged: bool,
    pub residual: f64,
}

impl DecayModeSolution {
    pub fn kappa_re(&self) -> f64 {
        self.kappa.re
    }

    pub fn purity(&self) -> f64 {
        (self.s0[0].powi(2) + self.s0[1].powi(2) + self.s0[2].powi(2)) / (self.n0 * self.n0)
    }
}

/// The 4×4 decay matrix for static `J`, `ε` in the order `(s_x, s_y, s_z, n)`.
pub fn decay_matrix(params: &ModelParams) -> DMatrix<f64> {
    decay_matrix_with(params, params.j, params.epsilon)
}

pub(crate) fn decay_matrix_with(params: &ModelParams, j: f64, eps: f64) -> DMatrix<f64> {
    let r = params.rates();
    let (t1, t2, fa) = (r.t1_inv, r.t2_inv, r.f_a);
    DMatrix::from_row_slice(
        4,
        4,
        &[
            t2, 2.0 * eps, 0.0, 0.0,
            -2.0 * eps, t2, -2.0 * j, 0.0,
            0.0, 2.0 * j, t1, fa * t1,
            0.0, 0.0, fa * t1, t1,
        ],
    )
}

/// All four eigenmodes of the decay matrix (interaction ignored).
pub fn linear_decay_modes(params: &ModelParams) -> Vec<DecayModeSolution> {
    let m = decay_matrix(params);
    let scale = m.norm().max(1e-300);
    let mc = m.map(|x| Complex64::new(x, 0.0));
    eigenpairs(&m)
        .into_iter()
        .map(|pair| {
            let mut v = pair.vector;
            let kappa = if pair.value.im.abs() <= 1e-12 * scale {
                Complex64::new(pair.value.re, 0.0)
            } else {
                pair.value
            };
            let residual = (&mc * &v - &v * pair.value).norm() / v.norm();
            // rotate the phase so the largest component is real
            let (imax, _) = v
                .iter()
                .enumerate()
                .fold((0, 0.0), |acc, (i, z)| if z.norm() > acc.1 { (i, z.norm()) } else { acc });
            let phase = v[imax] / v[imax].norm();
            v /= phase;
            let mut s0 = [v[0].re, v[1].re, v[2].re];
            let mut n0 = v[3].re;
            let imag_part = v.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
            let real_mode = kappa.im == 0.0 && imag_part < 1e-8;
            if n0 < 0.0 {
                n0 = -n0;
                s0.iter_mut().for_each(|x| *x = -*x);
            }
            let mut sol = DecayModeSolution {
                kappa,
                s0,
                n0,
                alpha: f64::NAN,
                physical: false,
                converged: residual < 1e-10 * scale,
                residual,
            };
            if real_mode && kappa.re >= -1e-12 * scale && n0 > 1e-12 {
                let s: Vec<f64> = s0.iter().map(|x| x / n0).collect();
                let alpha = s[0].hypot(s[1]);
                let norm = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
                if norm <= 1.0 + PHYS_TOL && alpha <= 1.0 + PHYS_TOL {
                    sol.s0 = [s[0], s[1], s[2]];
                    sol.n0 = 1.0;
                    sol.alpha = alpha;
                    sol.physical = true;
                    sol.kappa = Complex64::new(kappa.re.max(0.0), 0.0);
                }
            }
            sol
        })
        .collect()
}

/// The physical mode with the smallest decay rate.
pub fn select_physical(modes: &[DecayModeSolution]) -> Result<DecayModeSolution, SteadyError> {
    modes
        .iter()
        .filter(|m| m.physical)
        .min_by(|a, b| a.kappa.re.total_cmp(&b.kappa.re))
        .copied()
        .ok_or_else(|| SteadyError::NoPhysicalMode(modes.iter().map(|m| m.kappa).collect()))
}

/// Slowest physical linear decay mode.
pub fn steady_mode(params: &ModelParams) -> Result<DecayModeSolution, SteadyError> {
    select_physical(&linear_decay_modes(params))
}

/// Contrast of the quasi-steady state as a function of its decay rate at
/// `ε = 0`: `α = |2J(T1⁻¹ − κ) / (f_a T1⁻¹ (T2⁻¹ − κ))|`.
pub fn alpha_from_kappa(params: &ModelParams, kappa: f64) -> Result<f64, SteadyError> {
    if params.epsilon != 0.0 {
        return Err(SteadyError::NonzeroBias(params.epsilon));
    }
    let r = params.rates();
    let den = r.f_a * r.t1_inv * (r.t2_inv - kappa);
    if den == 0.0 {
        return Err(SteadyError::Singular("f_a T1⁻¹ (T2⁻¹ − κ) = 0"));
    }
    Ok((2.0 * params.j * (r.t1_inv - kappa) / den).abs())
}

/// Weak- and strong-tunneling approximations of the steady contrast,
/// `2J / (T2⁻¹ − (1 − f_a) T1⁻¹)` and `f_a T1⁻¹ / 2J`.
pub fn alpha_limits(params: &ModelParams) -> Result<(f64, f64), SteadyError> {
    if params.epsilon != 0.0 {
        return Err(SteadyError::NonzeroBias(params.epsilon));
    }
    let r = params.rates();
    let fa = r.f_a.abs();
    let den_small = r.t2_inv - (1.0 - fa) * r.t1_inv;
    if den_small == 0.0 {
        return Err(SteadyError::Singular("T2⁻¹ = (1 − f_a) T1⁻¹"));
    }
    if params.j == 0.0 {
        return Err(SteadyError::Singular("J = 0 in the strong-tunneling form"));
    }
    Ok((2.0 * params.j / den_small, fa * r.t1_inv / (2.0 * params.j)))
}

/// Tunneling rate `J* = ½ √(f_a² T1⁻² + |f_a| γ_p T1⁻¹)` at which the
/// contrast is approximately maximal.
pub fn sr_condition_j(params: &ModelParams) -> Result<f64, SteadyError> {
    let r = params.rates();
    let fa = r.f_a.abs();
    if fa == 0.0 {
        return Err(SteadyError::NoResonance);
    }
    Ok(0.5 * (fa * fa * r.t1_inv * r.t1_inv + fa * params.gamma_p * r.t1_inv).sqrt())
}

/// Particle number below which the self-trapped quasi-steady branches
/// disappear: `√max(0, 4J² − f_a² T1⁻²) / U`.
pub fn critical_n(params: &ModelParams) -> Result<f64, SteadyError> {
    if params.u == 0.0 {
        return Err(SteadyError::NoInteraction);
    }
    let r = params.rates();
    let d = 4.0 * params.j * params.j - (r.f_a * r.t1_inv).powi(2);
    Ok(d.max(0.0).sqrt() / params.u.abs())
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (i, x) in a.iter().enumerate() {
        out[i] += x;
    }
    for (i, x) in b.iter().enumerate() {
        out[i] += x;
    }
    out
}

fn poly_scale(a: &[f64], c: f64) -> Vec<f64> {
    a.iter().map(|x| x * c).collect()
}

/// Ascending coefficients in κ of the decay-rate quartic at `ε = 0`,
/// `(a² − F²)(F² b² + g² a²) + 4 J² F² a b` with `a = κ − T1⁻¹`,
/// `b = κ − T2⁻¹`, `F = f_a T1⁻¹`, `g = Un`.
pub fn quartic_coefficients(params: &ModelParams, n: f64) -> Vec<f64> {
    let r = params.rates();
    let f = r.f_a * r.t1_inv;
    let g = params.u * n;
    let a = [-r.t1_inv, 1.0];
    let b = [-r.t2_inv, 1.0];
    let a2 = poly_mul(&a, &a);
    let b2 = poly_mul(&b, &b);
    let first = poly_add(&a2, &[-f * f]);
    let second = poly_add(&poly_scale(&b2, f * f), &poly_scale(&a2, g * g));
    let coupling = poly_scale(&poly_mul(&a, &b), 4.0 * params.j * params.j * f * f);
    poly_add(&poly_mul(&first, &second), &coupling)
}

/// Component-wise stationarity residual of a decay mode at frozen `n`,
/// `|bloch_rhs(s0, n) + κ (s0, n)|_∞`.
pub fn stationarity_residual(params: &ModelParams, kappa: f64, s0: [f64; 3], n: f64) -> f64 {
    let state = BlochState::new(s0[0], s0[1], s0[2], n);
    let d = bloch_rhs(&state, params, 0.0, &DriveSpec::none());
    let v = state.to_array();
    d.to_array().iter().zip(v).map(|(x, y)| (x + kappa * y).abs()).fold(0.0, f64::max)
}

fn rate_scale(params: &ModelParams, n: f64) -> f64 {
    let r = params.rates();
    params.j.abs() + (params.u * n).abs() + r.t1_inv + r.t2_inv + params.epsilon.abs() + 1e-300
}

/// Physical quasi-steady states of the interacting condensate at particle
/// number `n` and `ε = 0`, sorted by κ. The modes carry `n0 = n` and `s0`
/// in particle units.
pub fn nonlinear_quasi_steady(params: &ModelParams, n: f64) -> Result<Vec<DecayModeSolution>, SteadyError> {
    if params.epsilon != 0.0 {
        return Err(SteadyError::NonzeroBias(params.epsilon));
    }
    if !(n > 0.0) {
        return Err(SteadyError::InvalidParticleNumber(n));
    }
    let r = params.rates();
    let f = r.f_a * r.t1_inv;
    if f == 0.0 {
        return Err(SteadyError::NoResonance);
    }
    if params.j == 0.0 {
        return Err(SteadyError::Singular("J = 0"));
    }
    let scale = rate_scale(params, n);
    let coeffs = quartic_coefficients(params, n);
    let mut kappas: Vec<(f64, bool)> = Vec::new();
    for (z, ok) in polynomial_roots(&coeffs) {
        if z.im.abs() > 1e-6 * scale {
            continue;
        }
        if kappas.iter().all(|(k, _)| (k - z.re).abs() > 1e-6 * scale) {
            kappas.push((z.re, ok));
        }
    }
    let mut out = Vec::new();
    for (kappa, ok) in kappas {
        if kappa < -1e-12 * scale {
            continue;
        }
        let a = kappa - r.t1_inv;
        let b = kappa - r.t2_inv;
        let s_z = a * n / f;
        let s_y = n * (a * a - f * f) / (2.0 * params.j * f);
        // s_x follows from either transverse equation; near b = 0 or
        // s_z = 0 one of them is ill-conditioned, so keep the better one.
        let mut candidates = Vec::with_capacity(2);
        if b.abs() >= 1e-6 * scale {
            candidates.push(params.u * s_y * s_z / b);
        } else {
            candidates.push(0.0);
        }
        if params.u != 0.0 && s_z != 0.0 {
            candidates.push((-b * s_y / s_z - 2.0 * params.j) / params.u);
        }
        let best = candidates
            .into_iter()
            .filter(|sx| (sx * sx + s_y * s_y + s_z * s_z).sqrt() <= n * (1.0 + PHYS_TOL))
            .map(|sx| (sx, stationarity_residual(params, kappa, [sx, s_y, s_z], n)))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        let Some((s_x, stat)) = best else {
            continue;
        };
        if stat > 1e-6 * scale * n {
            continue;
        }
        let residual = relative_residual(&coeffs, Complex64::new(kappa, 0.0));
        out.push(DecayModeSolution {
            kappa: Complex64::new(kappa.max(0.0), 0.0),
            s0: [s_x, s_y, s_z],
            n0: n,
            alpha: s_x.hypot(s_y) / n,
            physical: true,
            converged: ok,
            residual,
        });
    }
    out.sort_by(|a, b| a.kappa.re.total_cmp(&b.kappa.re));
    Ok(out)
}

/// Result of following one quasi-steady branch while the condensate decays.
#[derive(Debug, Clone, PartialEq)]
pub struct AdiabaticDecay {
    /// `s(t)`, `n(t)`, `α`, `p` of the tracked branch on the output grid.
    pub series: ObservableSeries,
    pub kappa: Vec<f64>,
    /// Set when the branch disappeared; the series ends before that time.
    pub branch_lost: Option<BranchLoss>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchLoss {
    /// Last integration time at which the branch still existed.
    pub t: f64,
    /// Particle number at which the number of quasi-steady states drops.
    pub n_critical: f64,
}

fn nearest(solutions: &[DecayModeSolution], kappa: f64) -> Option<DecayModeSolution> {
    solutions
        .iter()
        .min_by(|a, b| (a.kappa.re - kappa).abs().total_cmp(&(b.kappa.re - kappa).abs()))
        .copied()
}

fn solutions_at(params: &ModelParams, n: f64) -> Result<Vec<DecayModeSolution>, SteadyError> {
    if params.u == 0.0 {
        // κ and s/n are independent of n in the linear case
        let m = steady_mode(params)?;
        return Ok(vec![DecayModeSolution {
            s0: [m.s0[0] * n, m.s0[1] * n, m.s0[2] * n],
            n0: n,
            ..m
        }]);
    }
    nonlinear_quasi_steady(params, n)
}

/// Integrate `dn/dt = −κ(n) n` along the slowest quasi-steady branch at
/// `n0`, continuing it by nearest κ. The branch counts as lost when the
/// number of quasi-steady states drops; the particle number of that drop is
/// located by bisection.
pub fn adiabatic_decay(
    params: &ModelParams,
    n0: f64,
    t_span: (f64, f64),
    grid: &[f64],
) -> Result<AdiabaticDecay, SteadyError> {
    let (t0, t1) = t_span;
    if !(t1 >= t0) || grid.iter().any(|t| !(t0..=t1).contains(t)) {
        return Err(SteadyError::InvalidGrid("grid outside the time span"));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(SteadyError::InvalidGrid("grid must be non-decreasing"));
    }
    let start = solutions_at(params, n0)?;
    let mut tracked = *start.first().ok_or(SteadyError::NoBranch(n0))?;
    let mut count = start.len();
    let mut series = ObservableSeries::with_capacity(grid.len());
    let mut kappas = Vec::with_capacity(grid.len());
    let max_rate = rate_scale(params, 0.0);
    let mut t = t0;
    let mut y = n0.ln();

    let record = |series: &mut ObservableSeries, kappas: &mut Vec<f64>, t: f64, sol: &DecayModeSolution| {
        let n = sol.n0;
        series.push(t, sol.s0, n);
        kappas.push(sol.kappa.re);
    };

    for &t_out in grid {
        while t < t_out {
            let h = (t_out - t).min(0.02 / max_rate);
            // RK4 in y = ln n with the branch followed by nearest κ
            let mut k_guess = tracked.kappa.re;
            let mut stage = |y: f64| -> Result<f64, SteadyError> {
                let sols = solutions_at(params, y.exp())?;
                let s = nearest(&sols, k_guess).ok_or(SteadyError::NoBranch(y.exp()))?;
                k_guess = s.kappa.re;
                Ok(-s.kappa.re)
            };
            let lost = |y_new: f64| -> Result<bool, SteadyError> {
                Ok(solutions_at(params, y_new.exp())?.len() < count)
            };
            let step = (|| -> Result<f64, SteadyError> {
                let k1 = stage(y)?;
                let k2 = stage(y + 0.5 * h * k1)?;
                let k3 = stage(y + 0.5 * h * k2)?;
                let k4 = stage(y + h * k3)?;
                Ok(y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
            })();
            let y_new = match step {
                Ok(v) => v,
                Err(SteadyError::NoBranch(_)) => f64::NAN,
                Err(e) => return Err(e),
            };
            if y_new.is_nan() || lost(y_new)? {
                let n_lo = if y_new.is_nan() { 0.0 } else { y_new.exp() };
                let n_critical = locate_count_drop(params, n_lo, y.exp(), count)?;
                return Ok(AdiabaticDecay {
                    series,
                    kappa: kappas,
                    branch_lost: Some(BranchLoss { t, n_critical }),
                });
            }
            let sols = solutions_at(params, y_new.exp())?;
            count = count.max(sols.len());
            tracked = nearest(&sols, tracked.kappa.re).ok_or(SteadyError::NoBranch(y_new.exp()))?;
            y = y_new;
            t += h;
        }
        let sols = solutions_at(params, y.exp())?;
        let sol = nearest(&sols, tracked.kappa.re).ok_or(SteadyError::NoBranch(y.exp()))?;
        record(&mut series, &mut kappas, t_out, &sol);
    }
    Ok(AdiabaticDecay { series, kappa: kappas, branch_lost: None })
}

/// Bisect in `n` between `n_lo` (fewer solutions) and `n_hi` (at least
/// `count` solutions).
fn locate_count_drop(params: &ModelParams, n_lo: f64, n_hi: f64, count: usize) -> Result<f64, SteadyError> {
    let (mut lo, mut hi) = (n_lo, n_hi);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mid <= 0.0 {
            break;
        }
        let c = match solutions_at(params, mid) {
            Ok(s) => s.len(),
            Err(SteadyError::NoBranch(_)) => 0,
            Err(e) => return Err(e),
        };
        if c >= count {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-10 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One row of a decay-mode scan; `branch_id` is −1 for masked cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "T1_inv")]
    pub t1_inv: f64,
    #[serde(rename = "Un")]
    pub un: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub n_solutions: usize,
    pub branch_id: i64,
}

/// Quasi-steady states at one `(J, T1⁻¹, Un)` point, keeping `γ_p`, `f_a`
/// and `ε` of `base`. `Un = 0` uses the linear problem (any `ε`).
pub fn scan_point(base: &ModelParams, j: f64, t1_inv: f64, un: f64) -> Vec<ScanRow> {
    let masked = || {
        vec![ScanRow { j, t1_inv, un, kappa: f64::NAN, alpha: f64::NAN, n_solutions: 0, branch_id: -1 }]
    };
    let p = base.with_j(j).with_t1_inv(t1_inv);
    if p.validate().is_err() {
        return masked();
    }
    let sols = if un == 0.0 {
        steady_mode(&p.with_u(0.0)).map(|m| vec![m])
    } else {
        nonlinear_quasi_steady(&p.with_u(un), 1.0)
    };
    match sols {
        Ok(s) if !s.is_empty() => s
            .iter()
            .enumerate()
            .map(|(i, m)| ScanRow {
                j,
                t1_inv,
                un,
                kappa: m.kappa.re,
                alpha: m.alpha,
                n_solutions: s.len(),
                branch_id: i as i64,
            })
            .collect(),
        _ => masked(),
    }
}

pub fn write_scan_csv<W: Write>(rows: &[ScanRow], mut w: W) -> io::Result<()> {
    writeln!(w, "J,T1_inv,Un,kappa,alpha,n_solutions,branch_id")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{},{},{}", r.j, r.t1_inv, r.un, r.kappa, r.alpha, r.n_solutions, r.branch_id)?;
    }
    Ok(())
}

/// Maximize a unimodal-near-the-peak function: coarse scan of `points`
/// samples (geometric when `lo > 0`), then golden-section refinement.
pub fn maximize(f: impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> (f64, f64) {
    let points = points.max(3);
    let xs: Vec<f64> = (0..points)
        .map(|i| {
            let u = i as f64 / (points - 1) as f64;
            if lo > 0.0 {
                lo * (hi / lo).powf(u)
            } else {
                lo + (hi - lo) * u
            }
        })
        .collect();
    let vals: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let best = vals
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut a = xs[best.saturating_sub(1)];
    let mut b = xs[(best + 1).min(points - 1)];
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a) > 1e-10 * (a.abs() + b.abs()).max(1e-300) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Indices of strict interior local maxima of a sampled curve.
pub fn interior_maxima(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] > values[i - 1] && values[i] > values[i + 1])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fig2(j: f64, t1: f64) -> ModelParams {
        ModelParams::from_loss(j, 0.0, 0.0, 5.0, t1, 0.5).unwrap()
    }

    #[test]
    fn block_decoupled_modes_at_zero_tunneling() {
        let p = ModelParams::new(0.0, 0.0, 1.5, 2.0, 1.0, 3.0).unwrap();
        let modes = linear_decay_modes(&p);
        let mut got: Vec<Complex64> = modes.iter().map(|m| m.kappa).collect();
        got.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        let t2 = 4.0;
        let want = [
            Complex64::new(1.0, 0.0),
            Complex64::new(3.0, 0.0),
            Complex64::new(t2, -3.0),
            Complex64::new(t2, 3.0),
        ];
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).norm() < 1e-10, "{g} vs {w}");
        }
        let sel = select_physical(&modes).unwrap();
        assert_relative_eq!(sel.kappa.re, 1.0, epsilon = 1e-12);
        assert_relative_eq!(sel.s0[2], -1.0, epsilon = 1e-10);
    }

    #[test]
    fn unbiased_loss_degenerate_block() {
        let p = ModelParams::new(0.0, 0.0, 0.0, 1.0, 2.0, 2.0).unwrap();
        let ks: Vec<f64> = linear_decay_modes(&p).iter().map(|m| m.kappa.re).collect();
        assert_eq!(ks.iter().filter(|k| (*k - 2.0).abs() < 1e-9).count(), 2);
    }

    #[test]
    fn conserved_system_selects_zero_rate() {
        let p = ModelParams::new(1.0, 0.0, 0.3, 0.0, 0.0, 0.0).unwrap();
        let m = steady_mode(&p).unwrap();
        assert!(m.kappa.re.abs() < 1e-12);
    }

    #[test]
    fn physical_alpha_matches_closed_form() {
        let p = fig2(2.0, 2.0);
        let m = steady_mode(&p).unwrap();
        let closed = alpha_from_kappa(&p, m.kappa.re).unwrap();
        assert!((m.alpha - closed).abs() < 1e-10);
    }

    #[test]
    fn exactly_one_physical_mode_at_fig2_rates() {
        for &j in &[0.1, 1.0, 2.0, 8.0] {
            for &t1 in &[0.25, 1.0, 4.0] {
                let n = linear_decay_modes(&fig2(j, t1)).iter().filter(|m| m.physical).count();
                assert_eq!(n, 1, "J={j} T1⁻¹={t1}");
            }
        }
    }

    #[test]
    fn limits_examples() {
        let (small, _) = alpha_limits(&fig2(0.1, 2.0)).unwrap();
        assert_relative_eq!(small, 0.2 / 6.0, epsilon = 1e-12);
        let (_, large) = alpha_limits(&fig2(50.0, 2.0)).unwrap();
        assert_relative_eq!(large, 0.01, epsilon = 1e-12);
    }

    #[test]
    fn sr_condition_examples() {
        assert_relative_eq!(sr_condition_j(&fig2(1.0, 2.0)).unwrap(), 6f64.sqrt() / 2.0, epsilon = 1e-12);
        let p = ModelParams::from_loss(1.0, 0.0, 0.0, 0.0, 2.0, 1.0).unwrap();
        assert_relative_eq!(sr_condition_j(&p).unwrap(), 1.0, epsilon = 1e-12);
        let p = ModelParams::from_loss(1.0, 0.0, 0.0, 5.0, 2.0, 0.0).unwrap();
        assert_eq!(sr_condition_j(&p), Err(SteadyError::NoResonance));
    }

    #[test]
    fn critical_n_examples() {
        let p = ModelParams::new(10.0, 1.0, 0.0, 0.0, 0.0, 0.0).unwrap();
        assert_relative_eq!(critical_n(&p).unwrap(), 20.0, epsilon = 1e-12);
        let p = ModelParams::from_loss(0.1, 1.0, 0.0, 0.0, 2.0, 0.5).unwrap();
        assert_eq!(critical_n(&p).unwrap(), 0.0);
        assert_eq!(critical_n(&p.with_u(0.0)), Err(SteadyError::NoInteraction));
    }

    #[test]
    fn nonlinear_reduces_to_linear() {
        for &j in &[0.3, 1.3, 4.0] {
            let p = fig2(j, 2.0);
            let lin = steady_mode(&p).unwrap();
            let nl = nonlinear_quasi_steady(&p, 50.0).unwrap();
            assert_eq!(nl.len(), 1);
            assert!((nl[0].kappa.re - lin.kappa.re).abs() < 1e-9);
            assert!((nl[0].alpha - lin.alpha).abs() < 1e-9);
        }
    }

    #[test]
    fn linear_adiabatic_decay_is_exponential() {
        let p = fig2(2.0, 2.0);
        let k = steady_mode(&p).unwrap().kappa.re;
        let grid = crate::series::linspace(0.0, 2.0, 11);
        let out = adiabatic_decay(&p, 100.0, (0.0, 2.0), &grid).unwrap();
        assert!(out.branch_lost.is_none());
        for (i, &t) in grid.iter().enumerate() {
            assert_relative_eq!(out.series.n[i], 100.0 * (-k * t).exp(), max_relative = 1e-12);
        }
    }

    #[test]
    fn golden_section_finds_peak() {
        let (x, fx) = maximize(|x| -(x - 1.7).powi(2) + 3.0, 0.1, 10.0, 40);
        assert!((x - 1.7).abs() < 1e-6);
        assert!((fx - 3.0).abs() < 1e-12);
    }
}
