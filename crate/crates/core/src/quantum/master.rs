use num_complex::Complex64;

use crate::meanfield::DriveSpec;
use crate::model::{hopping_elements, FockSector, ModelParams};
use crate::series::ObservableSeries;

use super::observables::block_expectations;
use super::{check_grid, BlockDensity, QuantumError, QuantumState};

type C64 = Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MasterOptions {
    /// Largest initial particle number accepted.
    pub n_max: usize,
    /// Target change of `(s, n)/N0` under step halving.
    pub tol: f64,
    pub max_halvings: usize,
}

impl Default for MasterOptions {
    fn default() -> Self {
        MasterOptions { n_max: 30, tol: 1e-8, max_halvings: 14 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MasterRun {
    pub series: ObservableSeries,
    pub states: Vec<BlockDensity>,
}

/// Per-sector constants of the Liouvillian.
struct Sector {
    hop: Vec<f64>,
    lz: Vec<f64>,
    /// `½ (γ_a1 n1 + γ_a2 n2)` on each basis state.
    loss: Vec<f64>,
}

struct Liouvillian {
    sectors: Vec<Sector>,
    params: ModelParams,
    drive: DriveSpec,
}

impl Liouvillian {
    fn new(n_max: usize, params: &ModelParams, drive: &DriveSpec) -> Self {
        let sectors = (0..=n_max)
            .map(|n| {
                let s = FockSector::new(n);
                Sector {
                    hop: hopping_elements(s),
                    lz: (0..=n).map(|i| s.lz_value(i)).collect(),
                    loss: (0..=n)
                        .map(|i| 0.5 * (params.gamma_a1 * i as f64 + params.gamma_a2 * (n - i) as f64))
                        .collect(),
                }
            })
            .collect();
        Liouvillian { sectors, params: *params, drive: *drive }
    }

    /// Bound on the spectral radius, for the RK4 stability limit.
    fn rate_bound(&self) -> f64 {
        let n = (self.sectors.len() - 1) as f64;
        let p = &self.params;
        let (j, e) = match self.drive.kind {
            crate::meanfield::DriveKind::None => (p.j.abs(), p.epsilon.abs()),
            _ => (self.drive.j0.abs() + self.drive.j1.abs(), self.drive.eps0.abs() + self.drive.eps1.abs()),
        };
        2.0 * j * (n + 1.0) + 2.0 * e * n + p.u.abs() * n * n + p.gamma_p * n * n + (p.gamma_a1 + p.gamma_a2) * n + 1e-12
    }

    fn apply(&self, t: f64, rho: &BlockDensity, out: &mut BlockDensity) {
        let (j, eps) = self.drive.couplings(&self.params, t);
        let (u, gp, g1, g2) = (self.params.u, self.params.gamma_p, self.params.gamma_a1, self.params.gamma_a2);
        let blocks = rho.blocks();
        let n_max = blocks.len() - 1;
        for (n, o) in out.blocks_mut().iter_mut().enumerate() {
            let r = &blocks[n];
            let sec = &self.sectors[n];
            let hd: Vec<f64> = sec.lz.iter().map(|m| 2.0 * eps * m + u * m * m).collect();
            let dim = n + 1;
            for k in 0..dim {
                for i in 0..dim {
                    // (Hρ − ρH)_ik with H tridiagonal
                    let mut comm = r[(i, k)] * (hd[i] - hd[k]);
                    if i > 0 {
                        comm -= r[(i - 1, k)] * (j * sec.hop[i - 1]);
                    }
                    if i + 1 < dim {
                        comm -= r[(i + 1, k)] * (j * sec.hop[i]);
                    }
                    if k > 0 {
                        comm += r[(i, k - 1)] * (j * sec.hop[k - 1]);
                    }
                    if k + 1 < dim {
                        comm += r[(i, k + 1)] * (j * sec.hop[k]);
                    }
                    let d = (i as f64 - k as f64).powi(2);
                    let mut v = C64::new(comm.im, -comm.re) - r[(i, k)] * (gp * d + sec.loss[i] + sec.loss[k]);
                    if n < n_max {
                        let up = &blocks[n + 1];
                        v += up[(i + 1, k + 1)] * (g1 * (((i + 1) * (k + 1)) as f64).sqrt());
                        v += up[(i, k)] * (g2 * (((n + 1 - i) * (n + 1 - k)) as f64).sqrt());
                    }
                    o[(i, k)] = v;
                }
            }
        }
    }

    fn rk4(&self, t: f64, h: f64, rho: &mut BlockDensity, scratch: &mut [BlockDensity; 5]) {
        let [k1, k2, k3, k4, tmp] = scratch;
        self.apply(t, rho, k1);
        tmp.clone_from(rho);
        tmp.axpy(0.5 * h, k1);
        self.apply(t + 0.5 * h, tmp, k2);
        tmp.clone_from(rho);
        tmp.axpy(0.5 * h, k2);
        self.apply(t + 0.5 * h, tmp, k3);
        tmp.clone_from(rho);
        tmp.axpy(h, k3);
        self.apply(t + h, tmp, k4);
        rho.axpy(h / 6.0, k1);
        rho.axpy(h / 3.0, k2);
        rho.axpy(h / 3.0, k3);
        rho.axpy(h / 6.0, k4);
    }

    fn advance(&self, t0: f64, t1: f64, steps: usize, rho: &mut BlockDensity, scratch: &mut [BlockDensity; 5]) {
        let h = (t1 - t0) / steps as f64;
        for k in 0..steps {
            self.rk4(t0 + k as f64 * h, h, rho, scratch);
        }
    }
}

fn observable_vector(rho: &BlockDensity) -> [f64; 4] {
    let e = block_expectations(rho);
    [e.s[0], e.s[1], e.s[2], e.n]
}

/// Propagate the master equation with fixed-step RK4. Each interval between
/// output times is integrated with `m` and `2m` steps, doubling `m` until
/// the observables `(s, n)/N0` agree to `options.tol`.
pub fn propagate_master(
    rho0: &QuantumState,
    params: &ModelParams,
    drive: &DriveSpec,
    t_span: (f64, f64),
    grid: &[f64],
    options: &MasterOptions,
) -> Result<MasterRun, QuantumError> {
    drive.validate()?;
    check_grid(t_span, grid)?;
    let n0 = rho0.n_max();
    if n0 > options.n_max {
        return Err(QuantumError::TooManyParticles { n: n0, limit: options.n_max });
    }
    let liouv = Liouvillian::new(n0, params, drive);
    let h_max = 0.5 / liouv.rate_bound();
    let scale = (n0 as f64).max(1.0);
    let mut rho = rho0.to_mixed();
    let zero = BlockDensity::zeros(n0);
    let mut scratch = [zero.clone(), zero.clone(), zero.clone(), zero.clone(), zero];
    let mut series = ObservableSeries::with_capacity(grid.len());
    let mut states = Vec::with_capacity(grid.len());
    let mut t = t_span.0;
    for &t_out in grid {
        if t_out > t {
            let mut m = ((t_out - t) / h_max).ceil().max(1.0) as usize;
            let mut coarse = rho.clone();
            liouv.advance(t, t_out, m, &mut coarse, &mut scratch);
            let mut halvings = 0;
            loop {
                let mut fine = rho.clone();
                liouv.advance(t, t_out, 2 * m, &mut fine, &mut scratch);
                let a = observable_vector(&coarse);
                let b = observable_vector(&fine);
                let change = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale;
                if change < options.tol {
                    rho = fine;
                    break;
                }
                halvings += 1;
                if halvings > options.max_halvings {
                    return Err(QuantumError::StepHalving { achieved: change, target: options.tol, halvings });
                }
                coarse = fine;
                m *= 2;
            }
            t = t_out;
        }
        let e = block_expectations(&rho);
        series.push(t_out, e.s, e.n);
        states.push(rho.clone());
    }
    Ok(MasterRun { series, states })
}

/// Dense Liouvillian action, for tests: `L[ρ]` of one block set.
#[cfg(test)]
pub(crate) fn lindblad_action(params: &ModelParams, rho: &BlockDensity) -> BlockDensity {
    let l = Liouvillian::new(rho.n_max(), params, &DriveSpec::none());
    let mut out = BlockDensity::zeros(rho.n_max());
    l.apply(0.0, rho, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use crate::model::{angular_momentum_ops, build_hamiltonian};

    /// Dense oracle: Lindblad generator built from explicit operators on the
    /// full Fock space truncated at N.
    #[test]
    fn matches_dense_lindblad() {
        let params = ModelParams::new(0.7, 0.3, 0.4, 1.1, 0.6, 1.3).unwrap();
        let n_max = 3;
        // random-ish Hermitian positive blocks
        let mut rho = BlockDensity::zeros(n_max);
        for (n, b) in rho.blocks_mut().iter_mut().enumerate() {
            let a = DMatrix::from_fn(n + 1, n + 1, |i, k| C64::new((i + 2 * k + n) as f64 * 0.1, (i as f64 - k as f64) * 0.07));
            *b = &a * a.adjoint();
        }
        let fast = lindblad_action(&params, &rho);
        for n in 0..=n_max {
            let s = FockSector::new(n);
            let h = build_hamiltonian(s, &params);
            let ops = angular_momentum_ops(s);
            let ident = DMatrix::<C64>::identity(n + 1, n + 1);
            let n1 = &ident * C64::new(0.5 * n as f64, 0.0) - &ops.lz;
            let n2 = &ident * C64::new(0.5 * n as f64, 0.0) + &ops.lz;
            let r = rho.block(n);
            let i = C64::new(0.0, 1.0);
            let mut want = -(&h * r - r * &h) * i;
            for nj in [&n1, &n2] {
                want -= (nj * nj * r + r * nj * nj - nj * r * nj * C64::new(2.0, 0.0)) * C64::new(0.5 * params.gamma_p, 0.0);
            }
            want -= (&n1 * r + r * &n1) * C64::new(0.5 * params.gamma_a1, 0.0);
            want -= (&n2 * r + r * &n2) * C64::new(0.5 * params.gamma_a2, 0.0);
            if n < n_max {
                // a1: |i>_{n+1} -> sqrt(i)|i-1>_n ; a2: |i>_{n+1} -> sqrt(n+1-i)|i>_n
                let a1 = DMatrix::from_fn(n + 1, n + 2, |r, c| if c == r + 1 { C64::new((c as f64).sqrt(), 0.0) } else { C64::new(0.0, 0.0) });
                let a2 = DMatrix::from_fn(n + 1, n + 2, |r, c| if c == r { C64::new(((n + 1 - c) as f64).sqrt(), 0.0) } else { C64::new(0.0, 0.0) });
                let up = rho.block(n + 1);
                want += &a1 * up * a1.adjoint() * C64::new(params.gamma_a1, 0.0);
                want += &a2 * up * a2.adjoint() * C64::new(params.gamma_a2, 0.0);
            }
            assert!((fast.block(n) - want).norm() < 1e-12, "sector {n}");
        }
    }
}
