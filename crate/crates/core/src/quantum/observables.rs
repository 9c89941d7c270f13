use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{self, Write};

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::gauss_legendre;
use crate::model::{angular_momentum_ops, coherent_state, hopping_elements, FockSector};

use super::{BlockDensity, QuantumError, QuantumState};

type C64 = Complex64;

/// Number of bins of the common phase grid, centered at `2πj / PHI_BINS`.
pub const PHI_BINS: usize = 256;

/// First moments of the collective spin: `s = 2⟨L⟩` and `n = ⟨n̂⟩`, plus
/// `⟨n̂1⟩` and `⟨a1† a2⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expectations {
    pub n: f64,
    pub s: [f64; 3],
    pub n1: f64,
    pub hop: C64,
}

/// `(trace, ⟨n̂1⟩, ⟨a1† a2⟩, ⟨L_z⟩)` of one sector block, unnormalized.
fn block_moments(n: usize, rho: &DMatrix<C64>) -> (f64, f64, C64, f64) {
    let sector = FockSector::new(n);
    let mut tr = 0.0;
    let mut n1 = 0.0;
    let mut lz = 0.0;
    for i in 0..=n {
        let p = rho[(i, i)].re;
        tr += p;
        n1 += p * i as f64;
        lz += p * sector.lz_value(i);
    }
    let hop = hopping_elements(sector)
        .iter()
        .enumerate()
        .map(|(i, t)| rho[(i, i + 1)] * *t)
        .sum();
    (tr, n1, hop, lz)
}

pub(crate) fn pure_moments(n: usize, psi: &[C64]) -> (f64, f64, C64, f64) {
    let sector = FockSector::new(n);
    let mut tr = 0.0;
    let mut n1 = 0.0;
    let mut lz = 0.0;
    let mut hop = C64::new(0.0, 0.0);
    for i in 0..=n {
        let p = psi[i].norm_sqr();
        tr += p;
        n1 += p * i as f64;
        lz += p * sector.lz_value(i);
        if i < n {
            let t = (((i + 1) * (n - i)) as f64).sqrt();
            hop += psi[i] * psi[i + 1].conj() * t;
        }
    }
    (tr, n1, hop, lz)
}

pub fn expectations(state: &QuantumState) -> Expectations {
    match state {
        QuantumState::Pure { n_total, psi } => moments_to_expectations(&[(*n_total, pure_moments(*n_total, psi.as_slice()))]),
        QuantumState::Mixed(rho) => block_expectations(rho),
    }
}

pub(crate) fn block_expectations(rho: &BlockDensity) -> Expectations {
    let m: Vec<_> = rho.blocks().iter().enumerate().map(|(n, b)| (n, block_moments(n, b))).collect();
    moments_to_expectations(&m)
}

fn moments_to_expectations(sectors: &[(usize, (f64, f64, C64, f64))]) -> Expectations {
    let mut acc = (0.0, 0.0, C64::new(0.0, 0.0), 0.0);
    let mut n_mean = 0.0;
    let mut add = |n: usize, m: (f64, f64, C64, f64)| {
        acc.0 += m.0;
        acc.1 += m.1;
        acc.2 += m.2;
        acc.3 += m.3;
        n_mean += m.0 * n as f64;
    };
    for &(n, m) in sectors {
        add(n, m);
    }
    let (tr, n1, hop, lz) = acc;
    // normalize in case the state carries a trace slightly off 1
    let inv = if tr > 0.0 { 1.0 / tr } else { 0.0 };
    // a1† a2 = L_x − i L_y
    Expectations {
        n: n_mean * inv,
        s: [2.0 * hop.re * inv, -2.0 * hop.im * inv, 2.0 * lz * inv],
        n1: n1 * inv,
        hop: hop * inv,
    }
}

/// Reduced single-particle density matrix normalized by `⟨n̂⟩`, and its
/// purity `2 tr ρ² − 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedSpdm {
    pub matrix: Matrix2<C64>,
    pub purity: f64,
}

pub fn reduced_spdm(state: &QuantumState) -> Result<ReducedSpdm, QuantumError> {
    let e = expectations(state);
    if !(e.n > 0.0) {
        return Err(QuantumError::Vacuum);
    }
    let n1 = e.n1 / e.n;
    let n2 = (e.n - e.n1) / e.n;
    let off = e.hop / e.n;
    let matrix = Matrix2::new(C64::new(n1, 0.0), off, off.conj(), C64::new(n2, 0.0));
    let tr2 = (matrix * matrix).trace().re;
    Ok(ReducedSpdm { matrix, purity: 2.0 * tr2 - 1.0 })
}

/// Symmetrized covariances `⟨L_j L_k + L_k L_j⟩ − 2⟨L_j⟩⟨L_k⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSet {
    pub xx: f64,
    pub yy: f64,
    pub zz: f64,
    pub xy: f64,
    pub xz: f64,
    pub yz: f64,
}

impl CovarianceSet {
    pub fn matrix(&self) -> [[f64; 3]; 3] {
        [[self.xx, self.xy, self.xz], [self.xy, self.yy, self.yz], [self.xz, self.yz, self.zz]]
    }
}

pub fn covariances(state: &QuantumState) -> CovarianceSet {
    let mut second = [[0.0; 3]; 3];
    let mut first = [0.0; 3];
    let mut trace = 0.0;
    let mut accumulate = |n: usize, rho: &DMatrix<C64>| {
        let ops = angular_momentum_ops(FockSector::new(n));
        let l = [&ops.lx, &ops.ly, &ops.lz];
        let rl: Vec<DMatrix<C64>> = l.iter().map(|op| rho * *op).collect();
        trace += rho.trace().re;
        for j in 0..3 {
            first[j] += rl[j].trace().re;
            for k in j..3 {
                // tr(ρ L_j L_k) + c.c.
                let v = 2.0 * (&rl[j] * l[k]).trace().re;
                second[j][k] += v;
            }
        }
    };
    match state {
        QuantumState::Pure { n_total, psi } => accumulate(*n_total, &(psi * psi.adjoint())),
        QuantumState::Mixed(rho) => {
            for (n, b) in rho.blocks().iter().enumerate() {
                if b.trace().re != 0.0 {
                    accumulate(n, b);
                }
            }
        }
    }
    let inv = if trace > 0.0 { 1.0 / trace } else { 0.0 };
    let m = |j: usize, k: usize| second[j][k] * inv - 2.0 * first[j] * first[k] * inv * inv;
    CovarianceSet { xx: m(0, 0), yy: m(1, 1), zz: m(2, 2), xy: m(0, 1), xz: m(0, 2), yz: m(1, 2) }
}

/// `P(L_z = m)` over all sectors and `P(φ)` on the common phase grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementDistributions {
    /// `(m, P)` sorted by `m`, with `m = (n2 − n1)/2`.
    pub sz: Vec<(f64, f64)>,
    pub phi_centers: Vec<f64>,
    pub phi: Vec<f64>,
}

impl MeasurementDistributions {
    /// CSV `bin_center,probability,kind` with `kind` ∈ {sz, phi}.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "bin_center,probability,kind")?;
        for (m, p) in &self.sz {
            writeln!(w, "{},{},sz", m, p)?;
        }
        for (c, p) in self.phi_centers.iter().zip(&self.phi) {
            writeln!(w, "{},{},phi", c, p)?;
        }
        Ok(())
    }
}

fn phase_overlaps(n: usize, phi: f64) -> DVector<C64> {
    let sector = FockSector::new(n);
    let norm = ((n + 1) as f64).sqrt();
    DVector::from_fn(n + 1, |i, _| C64::from_polar(1.0 / norm, -phi * sector.lz_value(i)))
}

/// Measurement statistics of `L_z` and of the relative phase. In each
/// sector the phase is resolved on that sector's own `n + 1` phase states;
/// the sector results are then accumulated onto [`PHI_BINS`] common bins.
pub fn measurement_distributions(state: &QuantumState) -> MeasurementDistributions {
    let mut sz: BTreeMap<i64, f64> = BTreeMap::new();
    let mut phi = vec![0.0; PHI_BINS];
    let mut sector = |n: usize, diag: &dyn Fn(usize) -> f64, phase_prob: &dyn Fn(&DVector<C64>) -> f64| {
        for i in 0..=n {
            *sz.entry(n as i64 - 2 * i as i64).or_insert(0.0) += diag(i);
        }
        for k in 0..=n {
            let angle = 2.0 * PI * k as f64 / (n + 1) as f64;
            let bin = ((angle * PHI_BINS as f64 / (2.0 * PI)).round() as usize) % PHI_BINS;
            phi[bin] += phase_prob(&phase_overlaps(n, angle));
        }
    };
    match state {
        QuantumState::Pure { n_total, psi } => {
            sector(*n_total, &|i| psi[i].norm_sqr(), &|v| v.dotc(psi).norm_sqr());
        }
        QuantumState::Mixed(rho) => {
            for (n, b) in rho.blocks().iter().enumerate() {
                if b.trace().re == 0.0 {
                    continue;
                }
                sector(n, &|i| b[(i, i)].re, &|v| (v.adjoint() * b * v)[(0, 0)].re);
            }
        }
    }
    MeasurementDistributions {
        sz: sz.into_iter().map(|(k, p)| (0.5 * k as f64, p)).collect(),
        phi_centers: (0..PHI_BINS).map(|j| 2.0 * PI * j as f64 / PHI_BINS as f64).collect(),
        phi,
    }
}

/// Husimi function on a Gauss–Legendre (in `cos θ`) × uniform (in `φ`)
/// mesh. `q[i * phi.len() + k]` belongs to `theta[i]`, `phi[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HusimiGrid {
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub q: Vec<f64>,
    theta_weights: Vec<f64>,
}

impl HusimiGrid {
    pub fn at(&self, i: usize, k: usize) -> f64 {
        self.q[i * self.phi.len() + k]
    }

    /// `∫ Q dΩ` by the mesh quadrature.
    pub fn integral(&self) -> f64 {
        let dphi = 2.0 * PI / self.phi.len() as f64;
        self.theta_weights
            .iter()
            .enumerate()
            .map(|(i, w)| w * dphi * (0..self.phi.len()).map(|k| self.at(i, k)).sum::<f64>())
            .sum()
    }

    /// Mesh point `(θ, φ)` of the largest value.
    pub fn argmax(&self) -> (f64, f64) {
        let (idx, _) = self
            .q
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        (self.theta[idx / self.phi.len()], self.phi[idx % self.phi.len()])
    }

    /// Dense grid file with header `theta,phi,Q`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "theta,phi,Q")?;
        for (i, th) in self.theta.iter().enumerate() {
            for (k, ph) in self.phi.iter().enumerate() {
                writeln!(w, "{},{},{}", th, ph, self.at(i, k))?;
            }
        }
        Ok(())
    }
}

/// `Q(θ, φ) = Σ_n (n+1)/(4π) ⟨θ,φ; n| ρ_n |θ,φ; n⟩`.
pub fn husimi_q(state: &QuantumState, n_theta: usize, n_phi: usize) -> HusimiGrid {
    let (x, w) = gauss_legendre(n_theta);
    // θ ascending from the north pole
    let mut nodes: Vec<(f64, f64)> = x.iter().zip(&w).map(|(x, w)| (x.acos(), *w)).collect();
    nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let theta: Vec<f64> = nodes.iter().map(|n| n.0).collect();
    let theta_weights: Vec<f64> = nodes.iter().map(|n| n.1).collect();
    let phi: Vec<f64> = (0..n_phi).map(|k| 2.0 * PI * k as f64 / n_phi as f64).collect();
    let mut q = vec![0.0; n_theta * n_phi];
    let mut sector = |n: usize, form: &dyn Fn(&DVector<C64>) -> f64| {
        let pref = (n + 1) as f64 / (4.0 * PI);
        for (i, &th) in theta.iter().enumerate() {
            let base = coherent_state(FockSector::new(n), th, 0.0);
            for (k, &ph) in phi.iter().enumerate() {
                let c = DVector::from_fn(n + 1, |j, _| base[j] * C64::from_polar(1.0, ph * j as f64));
                q[i * n_phi + k] += pref * form(&c);
            }
        }
    };
    match state {
        QuantumState::Pure { n_total, psi } => sector(*n_total, &|c| c.dotc(psi).norm_sqr()),
        QuantumState::Mixed(rho) => {
            for (n, b) in rho.blocks().iter().enumerate() {
                if b.trace().re == 0.0 {
                    continue;
                }
                sector(n, &|c| (c.adjoint() * b * c)[(0, 0)].re);
            }
        }
    }
    HusimiGrid { theta, phi, q, theta_weights }
}
