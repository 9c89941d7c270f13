//! Two-mode Bose-Hubbard model: rates, Fock sectors and collective operators.
//!
//! Sector basis states are ordered as `|n1, n - n1>` with `n1 = 0..=n`, so
//! basis index `i` is the occupation of well 1. Every module relies on this
//! ordering.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("rate `{name}` must be finite and non-negative, got {value}")]
    NegativeRate { name: &'static str, value: f64 },
    #[error("parameter `{name}` must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },
}

/// Physical parameters of the open double well, all in s⁻¹ (ħ = 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "U")]
    pub u: f64,
    /// Bias `ε = ε₂ − ε₁`.
    pub epsilon: f64,
    pub gamma_p: f64,
    pub gamma_a1: f64,
    pub gamma_a2: f64,
}

impl ModelParams {
    pub fn new(
        j: f64,
        u: f64,
        epsilon: f64,
        gamma_p: f64,
        gamma_a1: f64,
        gamma_a2: f64,
    ) -> Result<Self, ModelError> {
        let p = ModelParams { j, u, epsilon, gamma_p, gamma_a1, gamma_a2 };
        p.validate()?;
        Ok(p)
    }

    /// Parameters specified through the loss rate `T1⁻¹` and asymmetry
    /// `f_a` instead of the per-well rates.
    pub fn from_loss(
        j: f64,
        u: f64,
        epsilon: f64,
        gamma_p: f64,
        t1_inv: f64,
        f_a: f64,
    ) -> Result<Self, ModelError> {
        if !(-1.0..=1.0).contains(&f_a) {
            return Err(ModelError::NonFinite { name: "f_a", value: f_a });
        }
        Self::new(
            j,
            u,
            epsilon,
            gamma_p,
            t1_inv * (1.0 - f_a),
            t1_inv * (1.0 + f_a),
        )
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, value) in [("J", self.j), ("U", self.u), ("epsilon", self.epsilon)] {
            if !value.is_finite() {
                return Err(ModelError::NonFinite { name, value });
            }
        }
        for (name, value) in [
            ("gamma_p", self.gamma_p),
            ("gamma_a1", self.gamma_a1),
            ("gamma_a2", self.gamma_a2),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(ModelError::NegativeRate { name, value });
            }
        }
        Ok(())
    }

    pub fn rates(&self) -> DerivedRates {
        derive_rates(self)
    }

    pub fn with_j(mut self, j: f64) -> Self {
        self.j = j;
        self
    }

    pub fn with_u(mut self, u: f64) -> Self {
        self.u = u;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    /// Same asymmetry, new total loss rate `T1⁻¹`.
    pub fn with_t1_inv(mut self, t1_inv: f64) -> Self {
        let f_a = self.rates().f_a;
        self.gamma_a1 = t1_inv * (1.0 - f_a);
        self.gamma_a2 = t1_inv * (1.0 + f_a);
        self
    }
}

/// Damping rates derived from the loss and dephasing rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedRates {
    pub t1_inv: f64,
    pub t2_inv: f64,
    pub f_a: f64,
}

pub fn derive_rates(params: &ModelParams) -> DerivedRates {
    let total = params.gamma_a1 + params.gamma_a2;
    let t1_inv = 0.5 * total;
    let f_a = if total > 0.0 {
        (params.gamma_a2 - params.gamma_a1) / total
    } else {
        0.0
    };
    DerivedRates { t1_inv, t2_inv: params.gamma_p + t1_inv, f_a }
}

/// Fixed total-particle-number subspace of the two-mode Fock space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FockSector {
    n_total: usize,
}

impl FockSector {
    pub fn new(n_total: usize) -> Self {
        FockSector { n_total }
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn dim(&self) -> usize {
        self.n_total + 1
    }

    /// Occupations `(n1, n2)` of basis state `index`.
    pub fn occupations(&self, index: usize) -> (usize, usize) {
        (index, self.n_total - index)
    }

    /// Eigenvalue of `L_z = (n2 - n1)/2` on basis state `index`.
    pub fn lz_value(&self, index: usize) -> f64 {
        0.5 * (self.n_total as f64 - 2.0 * index as f64)
    }
}

/// The su(2) generators `L_x`, `L_y`, `L_z` in one sector.
#[derive(Debug, Clone)]
pub struct AngularMomentum {
    pub lx: DMatrix<Complex64>,
    pub ly: DMatrix<Complex64>,
    pub lz: DMatrix<Complex64>,
}

/// Matrix elements of `a1† a2` below the diagonal: `<i+1| a1† a2 |i>`.
pub(crate) fn hopping_elements(sector: FockSector) -> Vec<f64> {
    let n = sector.n_total();
    (0..n)
        .map(|i| (((i + 1) * (n - i)) as f64).sqrt())
        .collect()
}

pub fn angular_momentum_ops(sector: FockSector) -> AngularMomentum {
    let dim = sector.dim();
    let mut lx = DMatrix::zeros(dim, dim);
    let mut ly = DMatrix::zeros(dim, dim);
    let mut lz = DMatrix::zeros(dim, dim);
    for (i, t) in hopping_elements(sector).into_iter().enumerate() {
        // a1† a2 moves one particle into well 1: |i> -> |i+1>.
        lx[(i + 1, i)] = Complex64::new(0.5 * t, 0.0);
        lx[(i, i + 1)] = Complex64::new(0.5 * t, 0.0);
        ly[(i + 1, i)] = Complex64::new(0.0, 0.5 * t);
        ly[(i, i + 1)] = Complex64::new(0.0, -0.5 * t);
    }
    for i in 0..dim {
        lz[(i, i)] = Complex64::new(sector.lz_value(i), 0.0);
    }
    AngularMomentum { lx, ly, lz }
}

/// `H = -2J L_x + 2ε L_z + U L_z²` in one sector.
pub fn build_hamiltonian(sector: FockSector, params: &ModelParams) -> DMatrix<Complex64> {
    hamiltonian_with(sector, params.j, params.epsilon, params.u)
}

pub(crate) fn hamiltonian_with(sector: FockSector, j: f64, epsilon: f64, u: f64) -> DMatrix<Complex64> {
    let dim = sector.dim();
    let mut h = DMatrix::zeros(dim, dim);
    for (i, t) in hopping_elements(sector).into_iter().enumerate() {
        h[(i + 1, i)] = Complex64::new(-j * t, 0.0);
        h[(i, i + 1)] = Complex64::new(-j * t, 0.0);
    }
    for i in 0..dim {
        let m = sector.lz_value(i);
        h[(i, i)] = Complex64::new(2.0 * epsilon * m + u * m * m, 0.0);
    }
    h
}

/// SU(2) coherent state with Bloch direction `(sinθ cosφ, sinθ sinφ, cosθ)`.
///
/// This is the product state `(c1 a1† + c2 a2†)^n |0,0> / √n!` with
/// `c1 = sin(θ/2) e^{iφ}` and `c2 = cos(θ/2)`.
pub fn coherent_state(sector: FockSector, theta: f64, phi: f64) -> nalgebra::DVector<Complex64> {
    let n = sector.n_total();
    let theta = theta.clamp(0.0, std::f64::consts::PI);
    let (s, c) = ((0.5 * theta).sin(), (0.5 * theta).cos());
    // ln C(n, k) accumulated incrementally
    let mut ln_binom = 0.0;
    let mut psi = nalgebra::DVector::zeros(n + 1);
    for k in 0..=n {
        if k > 0 {
            ln_binom += ((n - k + 1) as f64).ln() - (k as f64).ln();
        }
        let mag = if (k > 0 && s == 0.0) || (k < n && c == 0.0) {
            0.0
        } else {
            let mut ln_mag = 0.5 * ln_binom;
            if k > 0 {
                ln_mag += k as f64 * s.ln();
            }
            if k < n {
                ln_mag += (n - k) as f64 * c.ln();
            }
            ln_mag.exp()
        };
        psi[k] = Complex64::from_polar(mag, phi * k as f64);
    }
    let norm = psi.norm();
    psi / Complex64::new(norm, 0.0)
}
