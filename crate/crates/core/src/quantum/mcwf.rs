use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::meanfield::DriveSpec;
use crate::model::{hopping_elements, FockSector, ModelParams};
use crate::ode::{Dopri5, OdeError, Tolerances};
use crate::series::{alpha_and_purity, ObservableSeries, StandardErrors};

use super::observables::pure_moments;
use super::{check_grid, QuantumError, QuantumState};

type C64 = Complex64;

/// The four quantum-jump channels, in the order of
/// [`JumpOperatorSet`](super::JumpOperatorSet).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JumpKind {
    Dephase1,
    Dephase2,
    Loss1,
    Loss2,
}

const KINDS: [JumpKind; 4] = [JumpKind::Dephase1, JumpKind::Dephase2, JumpKind::Loss1, JumpKind::Loss2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McwfOptions {
    pub tol: Tolerances,
    pub max_steps: usize,
    /// Keep the normalized final state of every trajectory.
    pub keep_final_states: bool,
}

impl Default for McwfOptions {
    fn default() -> Self {
        McwfOptions { tol: Tolerances::default(), max_steps: 200_000_000, keep_final_states: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryFailure {
    pub index: usize,
    pub t: f64,
    pub reason: String,
}

/// Trajectory-averaged observables. `alpha` and `purity` of the series are
/// evaluated from the averaged `s` and `n`, i.e. they are the observables of
/// the ensemble density matrix; their standard errors are jackknife
/// estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct McwfEnsemble {
    pub series: ObservableSeries,
    /// Jump counts per completed trajectory, indexed like [`JumpKind`].
    pub jump_counts: Vec<[usize; 4]>,
    pub final_states: Vec<QuantumState>,
    pub failures: Vec<TrajectoryFailure>,
}

impl McwfEnsemble {
    pub fn completed(&self) -> usize {
        self.jump_counts.len()
    }
}

struct TrajectoryOutput {
    samples: Vec<[f64; 4]>,
    jumps: [usize; 4],
    final_state: Option<QuantumState>,
}

/// `dψ/dt = −i H_eff ψ` on interleaved `(re, im)` storage, with
/// `H_eff = H − (i/2) Σ_k L_k† L_k`.
fn effective_rhs(n: usize, params: ModelParams, drive: DriveSpec) -> impl FnMut(f64, &[f64], &mut [f64]) {
    let sector = FockSector::new(n);
    let hop = hopping_elements(sector);
    let lz: Vec<f64> = (0..=n).map(|i| sector.lz_value(i)).collect();
    let damp: Vec<f64> = (0..=n)
        .map(|i| {
            let (n1, n2) = (i as f64, (n - i) as f64);
            0.5 * (params.gamma_p * (n1 * n1 + n2 * n2) + params.gamma_a1 * n1 + params.gamma_a2 * n2)
        })
        .collect();
    move |t: f64, y: &[f64], dy: &mut [f64]| {
        let (j, eps) = drive.couplings(&params, t);
        let dim = n + 1;
        for i in 0..dim {
            let m = lz[i];
            let hd = 2.0 * eps * m + params.u * m * m;
            let mut hr = hd * y[2 * i];
            let mut hi = hd * y[2 * i + 1];
            if i > 0 {
                hr -= j * hop[i - 1] * y[2 * i - 2];
                hi -= j * hop[i - 1] * y[2 * i - 1];
            }
            if i + 1 < dim {
                hr -= j * hop[i] * y[2 * i + 2];
                hi -= j * hop[i] * y[2 * i + 3];
            }
            dy[2 * i] = hi - damp[i] * y[2 * i];
            dy[2 * i + 1] = -hr - damp[i] * y[2 * i + 1];
        }
    }
}

fn norm_sqr(y: &[f64]) -> f64 {
    y.iter().map(|v| v * v).sum()
}

fn to_complex(y: &[f64]) -> Vec<C64> {
    y.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect()
}

fn to_real(psi: &[C64]) -> Vec<f64> {
    psi.iter().flat_map(|z| [z.re, z.im]).collect()
}

/// Apply the chosen jump channel; returns the new sector and normalized
/// state.
fn apply_jump(kind: JumpKind, n: usize, psi: &[C64]) -> (usize, Vec<C64>) {
    let mut out: Vec<C64> = match kind {
        JumpKind::Dephase1 => psi.iter().enumerate().map(|(i, z)| z * i as f64).collect(),
        JumpKind::Dephase2 => psi.iter().enumerate().map(|(i, z)| z * (n - i) as f64).collect(),
        // a1 |i>_n = √i |i−1>_{n−1}
        JumpKind::Loss1 => (0..n).map(|i| psi[i + 1] * ((i + 1) as f64).sqrt()).collect(),
        // a2 |i>_n = √(n−i) |i>_{n−1}
        JumpKind::Loss2 => (0..n).map(|i| psi[i] * ((n - i) as f64).sqrt()).collect(),
    };
    let new_n = match kind {
        JumpKind::Loss1 | JumpKind::Loss2 => n - 1,
        _ => n,
    };
    let norm = out.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    out.iter_mut().for_each(|z| *z /= norm);
    (new_n, out)
}

fn jump_weights(params: &ModelParams, n: usize, psi: &[C64]) -> [f64; 4] {
    let mut w = [0.0; 4];
    for (i, z) in psi.iter().enumerate() {
        let p = z.norm_sqr();
        let (n1, n2) = (i as f64, (n - i) as f64);
        w[0] += params.gamma_p * n1 * n1 * p;
        w[1] += params.gamma_p * n2 * n2 * p;
        w[2] += params.gamma_a1 * n1 * p;
        w[3] += params.gamma_a2 * n2 * p;
    }
    w
}

fn sample(n: usize, y: &[f64]) -> [f64; 4] {
    let psi = to_complex(y);
    let (tr, _, hop, lz) = pure_moments(n, &psi);
    [2.0 * hop.re / tr, -2.0 * hop.im / tr, 2.0 * lz / tr, n as f64]
}

/// Time `t` in `[a, b]` where `f` changes sign (`f(a) > 0 ≥ f(b)`), by the
/// Illinois variant of regula falsi with a bisection fallback.
fn locate_crossing(mut f: impl FnMut(f64) -> f64, a: f64, b: f64) -> Option<f64> {
    let tol = 1e-13 * a.abs().max(b.abs()).max(1.0);
    let (mut lo, mut hi) = (a, b);
    let (mut flo, mut fhi) = (f(a), f(b));
    if !(flo > 0.0 && fhi <= 0.0) {
        return None;
    }
    let mut side = 0i32;
    for _ in 0..100 {
        if hi - lo <= tol {
            return Some(hi);
        }
        let c = (lo * fhi - hi * flo) / (fhi - flo);
        if !(c > lo && c < hi) {
            break;
        }
        let fc = f(c);
        if fc > 0.0 {
            lo = c;
            flo = fc;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = c;
            fhi = fc;
            if fc == 0.0 {
                return Some(c);
            }
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
    }
    for _ in 0..200 {
        if hi - lo <= tol {
            return Some(hi);
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (hi - lo <= tol).then_some(hi)
}

fn run_trajectory(
    n0: usize,
    psi0: &[C64],
    params: &ModelParams,
    drive: &DriveSpec,
    t0: f64,
    grid: &[f64],
    seed: u64,
    options: &McwfOptions,
) -> Result<TrajectoryOutput, (f64, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut n = n0;
    let mut solver = Dopri5::new(effective_rhs(n, *params, *drive), t0, to_real(psi0), options.tol);
    let mut threshold: f64 = rng.gen();
    let mut samples = Vec::with_capacity(grid.len());
    let mut jumps = [0usize; 4];
    let mut steps = 0usize;
    let mut next = 0;
    let mut buf = vec![0.0; 2 * (n + 1)];
    while next < grid.len() {
        let target = grid[next];
        if solver.t() >= target {
            samples.push(sample(n, solver.y()));
            next += 1;
            continue;
        }
        steps += 1;
        if steps > options.max_steps {
            return Err((solver.t(), OdeError::TooManySteps { t: solver.t(), target, max_steps: options.max_steps }.to_string()));
        }
        solver.step(target).map_err(|e| (solver.t(), e.to_string()))?;
        if norm_sqr(solver.y()) > threshold {
            continue;
        }
        let (a, b) = (solver.last_step_start(), solver.t());
        buf.resize(2 * (n + 1), 0.0);
        let t_jump = locate_crossing(
            |t| {
                solver.dense_output(t, &mut buf);
                norm_sqr(&buf) - threshold
            },
            a,
            b,
        )
        .ok_or_else(|| (a, "jump time could not be bracketed".to_string()))?;
        solver.dense_output(t_jump, &mut buf);
        let psi = to_complex(&buf);
        let w = jump_weights(params, n, &psi);
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            return Err((t_jump, "norm decayed without an active jump channel".to_string()));
        }
        let mut pick = rng.gen::<f64>() * total;
        let mut k = 3;
        for (idx, wk) in w.iter().enumerate() {
            if pick < *wk {
                k = idx;
                break;
            }
            pick -= wk;
        }
        // guard against round-off selecting an empty channel
        while w[k] == 0.0 {
            k -= 1;
        }
        jumps[k] += 1;
        let (new_n, new_psi) = apply_jump(KINDS[k], n, &psi);
        let h = solver.step_size();
        if new_n != n {
            n = new_n;
            solver = Dopri5::new(effective_rhs(n, *params, *drive), t_jump, to_real(&new_psi), options.tol);
            solver.set_step_size(h);
        } else {
            solver.reset(t_jump, &to_real(&new_psi));
        }
        threshold = rng.gen();
    }
    let final_state = options.keep_final_states.then(|| {
        let psi = to_complex(solver.y());
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        QuantumState::Pure { n_total: n, psi: DVector::from_iterator(n + 1, psi.into_iter().map(|z| z / norm)) }
    });
    Ok(TrajectoryOutput { samples, jumps, final_state })
}

/// Monte Carlo wave-function ensemble with the waiting-time algorithm.
/// Trajectory `k` draws from a ChaCha8 stream seeded with `seed + k`, so
/// results do not depend on the number of worker threads.
#[allow(clippy::too_many_arguments)]
pub fn mcwf_ensemble(
    psi0: &QuantumState,
    params: &ModelParams,
    drive: &DriveSpec,
    t_span: (f64, f64),
    grid: &[f64],
    n_traj: usize,
    seed: u64,
    options: &McwfOptions,
) -> Result<McwfEnsemble, QuantumError> {
    drive.validate()?;
    check_grid(t_span, grid)?;
    let QuantumState::Pure { n_total, psi } = psi0 else {
        return Err(QuantumError::NotPure);
    };
    if n_traj == 0 {
        return Err(QuantumError::NoTrajectories);
    }
    let psi = psi.as_slice().to_vec();
    let outputs: Vec<Result<TrajectoryOutput, (f64, String)>> = (0..n_traj)
        .into_par_iter()
        .map(|k| run_trajectory(*n_total, &psi, params, drive, t_span.0, grid, seed.wrapping_add(k as u64), options))
        .collect();

    let mut done = Vec::with_capacity(n_traj);
    let mut failures = Vec::new();
    for (index, out) in outputs.into_iter().enumerate() {
        match out {
            Ok(o) => done.push(o),
            Err((t, reason)) => failures.push(TrajectoryFailure { index, t, reason }),
        }
    }
    if done.is_empty() {
        let msg = failures.first().map(|f| f.reason.clone()).unwrap_or_default();
        return Err(QuantumError::AllTrajectoriesFailed(msg));
    }
    let series = reduce(grid, &done);
    Ok(McwfEnsemble {
        series,
        jump_counts: done.iter().map(|o| o.jumps).collect(),
        final_states: done.iter_mut().filter_map(|o| o.final_state.take()).collect(),
        failures,
    })
}

/// Ordered reduction: means and standard errors of `(s, n)`, jackknife
/// errors of the ensemble contrast and purity.
fn reduce(grid: &[f64], done: &[TrajectoryOutput]) -> ObservableSeries {
    let m = done.len() as f64;
    let mut series = ObservableSeries::with_capacity(grid.len());
    let mut errors = StandardErrors::default();
    for (g, &t) in grid.iter().enumerate() {
        let mut sum = [0.0; 4];
        for o in done {
            for c in 0..4 {
                sum[c] += o.samples[g][c];
            }
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / m).collect();
        let mut se = [0.0; 4];
        if done.len() > 1 {
            for c in 0..4 {
                let var: f64 = done.iter().map(|o| (o.samples[g][c] - mean[c]).powi(2)).sum::<f64>() / (m - 1.0);
                se[c] = (var / m).sqrt();
            }
        }
        series.push(t, [mean[0], mean[1], mean[2]], mean[3]);
        let (a_se, p_se) = if done.len() > 1 {
            let (a_full, p_full) = alpha_and_purity([mean[0], mean[1], mean[2]], mean[3]);
            let mut va = 0.0;
            let mut vp = 0.0;
            for o in done {
                let loo: Vec<f64> = (0..4).map(|c| (sum[c] - o.samples[g][c]) / (m - 1.0)).collect();
                let (a, p) = alpha_and_purity([loo[0], loo[1], loo[2]], loo[3]);
                va += (a - a_full).powi(2);
                vp += (p - p_full).powi(2);
            }
            (((m - 1.0) / m * va).sqrt(), ((m - 1.0) / m * vp).sqrt())
        } else {
            (0.0, 0.0)
        };
        errors.s_x.push(se[0]);
        errors.s_y.push(se[1]);
        errors.s_z.push(se[2]);
        errors.n.push(se[3]);
        errors.alpha.push(a_se);
        errors.purity.push(p_se);
    }
    series.errors = Some(errors);
    series
}
