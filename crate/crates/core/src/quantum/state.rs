use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::model::{coherent_state, FockSector, ModelParams};

use super::QuantumError;

type C64 = Complex64;

/// Density matrix without inter-sector coherences: `blocks[n]` is the
/// `(n+1) × (n+1)` block of the sector with `n` particles.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDensity {
    blocks: Vec<DMatrix<C64>>,
}

impl BlockDensity {
    pub fn zeros(n_max: usize) -> Self {
        BlockDensity { blocks: (0..=n_max).map(|n| DMatrix::zeros(n + 1, n + 1)).collect() }
    }

    pub fn from_pure(n_total: usize, psi: &DVector<C64>) -> Self {
        let mut rho = BlockDensity::zeros(n_total);
        rho.blocks[n_total] = psi * psi.adjoint();
        rho
    }

    /// Equal-weight mixture of the given states.
    pub fn from_ensemble(states: &[QuantumState]) -> Self {
        let n_max = states.iter().map(|s| s.n_max()).max().unwrap_or(0);
        let mut rho = BlockDensity::zeros(n_max);
        let w = C64::new(1.0 / states.len().max(1) as f64, 0.0);
        for s in states {
            match s {
                QuantumState::Pure { n_total, psi } => {
                    rho.blocks[*n_total] += psi * psi.adjoint() * w;
                }
                QuantumState::Mixed(m) => {
                    for (n, b) in m.blocks.iter().enumerate() {
                        rho.blocks[n] += b * w;
                    }
                }
            }
        }
        rho
    }

    pub fn n_max(&self) -> usize {
        self.blocks.len() - 1
    }

    pub fn block(&self, n: usize) -> &DMatrix<C64> {
        &self.blocks[n]
    }

    pub fn blocks(&self) -> &[DMatrix<C64>] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [DMatrix<C64>] {
        &mut self.blocks
    }

    pub fn trace(&self) -> f64 {
        self.blocks.iter().map(|b| b.trace().re).sum()
    }

    /// Probability of each particle number.
    pub fn sector_weights(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.trace().re).collect()
    }

    /// Largest entry of `ρ − ρ†`.
    pub fn hermiticity_error(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| (b - b.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue over all blocks (of the Hermitian part).
    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| {
                let h = (b + b.adjoint()) * C64::new(0.5, 0.0);
                h.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn axpy(&mut self, a: f64, x: &BlockDensity) {
        let a = C64::new(a, 0.0);
        for (b, xb) in self.blocks.iter_mut().zip(&x.blocks) {
            b.zip_apply(xb, |y, x| *y += a * x);
        }
    }
}

/// Many-body state: a normalized pure state in one number sector, or a
/// block density matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum QuantumState {
    Pure { n_total: usize, psi: DVector<C64> },
    Mixed(BlockDensity),
}

impl QuantumState {
    pub fn pure(n_total: usize, psi: DVector<C64>) -> Result<Self, QuantumError> {
        assert_eq!(psi.len(), n_total + 1, "state dimension must be n_total + 1");
        let norm = psi.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(QuantumError::ZeroNorm);
        }
        Ok(QuantumState::Pure { n_total, psi: psi / C64::new(norm, 0.0) })
    }

    pub fn coherent(n_total: usize, theta: f64, phi: f64) -> Self {
        QuantumState::Pure { n_total, psi: coherent_state(FockSector::new(n_total), theta, phi) }
    }

    /// Number state `|k, n − k⟩`.
    pub fn dicke(n_total: usize, k: usize) -> Self {
        let mut psi = DVector::zeros(n_total + 1);
        psi[k] = C64::new(1.0, 0.0);
        QuantumState::Pure { n_total, psi }
    }

    /// Phase state `(n+1)^{-1/2} Σ_m e^{−iφ m} |m⟩` over the `L_z`
    /// eigenstates; with this sign it peaks where a coherent state of
    /// azimuth `φ` does.
    pub fn phase_state(n_total: usize, phi: f64) -> Self {
        let sector = FockSector::new(n_total);
        let norm = ((n_total + 1) as f64).sqrt();
        let psi = DVector::from_fn(n_total + 1, |i, _| C64::from_polar(1.0 / norm, -phi * sector.lz_value(i)));
        QuantumState::Pure { n_total, psi }
    }

    /// Equal mixture of all number states with `n` particles.
    pub fn infinite_temperature(n_total: usize) -> Self {
        let mut rho = BlockDensity::zeros(n_total);
        rho.blocks[n_total] = DMatrix::identity(n_total + 1, n_total + 1) * C64::new(1.0 / (n_total + 1) as f64, 0.0);
        QuantumState::Mixed(rho)
    }

    pub fn n_max(&self) -> usize {
        match self {
            QuantumState::Pure { n_total, .. } => *n_total,
            QuantumState::Mixed(m) => m.n_max(),
        }
    }

    pub fn is_pure(&self) -> bool {
        matches!(self, QuantumState::Pure { .. })
    }

    pub fn to_mixed(&self) -> BlockDensity {
        match self {
            QuantumState::Pure { n_total, psi } => BlockDensity::from_pure(*n_total, psi),
            QuantumState::Mixed(m) => m.clone(),
        }
    }
}

/// Lindblad operators `√γ_p n̂1`, `√γ_p n̂2`, `√γ_a1 â1`, `√γ_a2 â2`, in
/// that order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpOperatorSet {
    pub rates: [f64; 4],
}

impl JumpOperatorSet {
    pub fn from_params(params: &ModelParams) -> Self {
        JumpOperatorSet { rates: [params.gamma_p, params.gamma_p, params.gamma_a1, params.gamma_a2] }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_states_are_orthonormal() {
        let n = 7;
        let states: Vec<_> = (0..=n)
            .map(|k| match QuantumState::phase_state(n, 2.0 * std::f64::consts::PI * k as f64 / (n + 1) as f64) {
                QuantumState::Pure { psi, .. } => psi,
                _ => unreachable!(),
            })
            .collect();
        for (a, pa) in states.iter().enumerate() {
            for (b, pb) in states.iter().enumerate() {
                let ov = pa.dotc(pb).norm();
                assert!((ov - if a == b { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ensemble_average_has_unit_trace() {
        let states = [QuantumState::coherent(3, 0.4, 0.1), QuantumState::dicke(2, 1)];
        let rho = BlockDensity::from_ensemble(&states);
        assert!((rho.trace() - 1.0).abs() < 1e-14);
        let w = rho.sector_weights();
        assert_eq!(&w[..2], &[0.0, 0.0]);
        assert!((w[2] - 0.5).abs() < 1e-15 && (w[3] - 0.5).abs() < 1e-15);
    }
}
