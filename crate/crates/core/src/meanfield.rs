//! Dissipative mean-field Bloch equations.
//!
//! The covariances of the collective spin are dropped (`Δ_jk = 0`), which
//! closes the dynamics on `(s_x, s_y, s_z, n)`. With `U = 0` this closure is
//! exact.

use nalgebra::{Matrix2, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ModelParams;
use crate::ode::{Dopri5, OdeError, Tolerances};
use crate::series::ObservableSeries;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeanFieldError {
    #[error("mean-field integration failed at t = {t}: {source}")]
    Integration { t: f64, source: OdeError },
    #[error("contrast undefined for n = {0}")]
    UndefinedContrast(f64),
    #[error("purity undefined for n = {0}")]
    UndefinedPurity(f64),
    #[error("output time {t} outside the integration span [{start}, {end}]")]
    GridOutsideSpan { t: f64, start: f64, end: f64 },
    #[error("output grid must be non-decreasing")]
    UnsortedGrid,
    #[error("invalid drive: {0}")]
    InvalidDrive(String),
    #[error("fixed-point search needs n_fixed > 0, got {0}")]
    InvalidParticleNumber(f64),
    #[error("fixed-point root finding failed from every start")]
    NoFixedPoints,
    #[error("no change in the fixed-point count between Un = {lo} and Un = {hi}")]
    NoBifurcation { lo: f64, hi: f64 },
}

/// Bloch vector `s_j = 2<L_j>` and particle number `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochState {
    pub s_x: f64,
    pub s_y: f64,
    pub s_z: f64,
    pub n: f64,
}

impl BlochState {
    pub fn new(s_x: f64, s_y: f64, s_z: f64, n: f64) -> Self {
        BlochState { s_x, s_y, s_z, n }
    }

    /// Pure condensate of `n` particles pointing along `(θ, φ)`.
    pub fn coherent(n: f64, theta: f64, phi: f64) -> Self {
        BlochState {
            s_x: n * theta.sin() * phi.cos(),
            s_y: n * theta.sin() * phi.sin(),
            s_z: n * theta.cos(),
            n,
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.s_x, self.s_y, self.s_z, self.n]
    }

    pub fn from_slice(y: &[f64]) -> Self {
        BlochState { s_x: y[0], s_y: y[1], s_z: y[2], n: y[3] }
    }

    pub fn s(&self) -> [f64; 3] {
        [self.s_x, self.s_y, self.s_z]
    }
}

pub fn contrast(state: &BlochState) -> Result<f64, MeanFieldError> {
    if state.n <= 0.0 {
        return Err(MeanFieldError::UndefinedContrast(state.n));
    }
    Ok(state.s_x.hypot(state.s_y) / state.n)
}

pub fn purity_mf(state: &BlochState) -> Result<f64, MeanFieldError> {
    if state.n <= 0.0 {
        return Err(MeanFieldError::UndefinedPurity(state.n));
    }
    let s2 = state.s_x * state.s_x + state.s_y * state.s_y + state.s_z * state.s_z;
    Ok(s2 / (state.n * state.n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriveKind {
    None,
    Tunneling,
    Bias,
}

/// Periodic modulation `J(t) = J0 + J1 cos ωt`, `ε(t) = ε0 + ε1 cos ωt`.
///
/// With `kind = None` the static `J` and `ε` of [`ModelParams`] are used and
/// the drive fields are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    pub kind: DriveKind,
    #[serde(rename = "J0", default)]
    pub j0: f64,
    #[serde(rename = "J1", default)]
    pub j1: f64,
    #[serde(default)]
    pub eps0: f64,
    #[serde(default)]
    pub eps1: f64,
    #[serde(default)]
    pub omega: f64,
}

impl Default for DriveSpec {
    fn default() -> Self {
        DriveSpec::none()
    }
}

impl DriveSpec {
    pub fn none() -> Self {
        DriveSpec { kind: DriveKind::None, j0: 0.0, j1: 0.0, eps0: 0.0, eps1: 0.0, omega: 0.0 }
    }

    /// Tunneling modulation around `J0`; the bias stays at `eps0`.
    pub fn tunneling(j0: f64, j1: f64, eps0: f64, omega: f64) -> Self {
        DriveSpec { kind: DriveKind::Tunneling, j0, j1, eps0, eps1: 0.0, omega }
    }

    /// Bias modulation around `eps0`; tunneling stays at `J0`.
    pub fn bias(j0: f64, eps0: f64, eps1: f64, omega: f64) -> Self {
        DriveSpec { kind: DriveKind::Bias, j0, j1: 0.0, eps0, eps1, omega }
    }

    pub fn validate(&self) -> Result<(), MeanFieldError> {
        let bad = |msg: &str| Err(MeanFieldError::InvalidDrive(msg.to_string()));
        if [self.j0, self.j1, self.eps0, self.eps1, self.omega].iter().any(|v| !v.is_finite()) {
            return bad("non-finite drive parameter");
        }
        if self.j0 < 0.0 || self.j1 < 0.0 || self.eps1 < 0.0 {
            return bad("drive amplitudes must be non-negative");
        }
        match self.kind {
            DriveKind::None if self.j1 != 0.0 || self.eps1 != 0.0 => {
                bad("kind = none requires J1 = eps1 = 0")
            }
            DriveKind::Tunneling if self.eps1 != 0.0 => bad("tunneling drive requires eps1 = 0"),
            DriveKind::Bias if self.j1 != 0.0 => bad("bias drive requires J1 = 0"),
            _ => Ok(()),
        }
    }

    /// Instantaneous `(J(t), ε(t))`.
    pub fn couplings(&self, params: &ModelParams, t: f64) -> (f64, f64) {
        match self.kind {
            DriveKind::None => (params.j, params.epsilon),
            _ => {
                let c = (self.omega * t).cos();
                (self.j0 + self.j1 * c, self.eps0 + self.eps1 * c)
            }
        }
    }
}

/// Right-hand side of the truncated Bloch equations.
pub fn bloch_rhs(state: &BlochState, params: &ModelParams, t: f64, drive: &DriveSpec) -> BlochState {
    let mut dy = [0.0; 4];
    let rates = params.rates();
    let (j, eps) = drive.couplings(params, t);
    rhs_into(&state.to_array(), j, eps, params.u, rates.t1_inv, rates.t2_inv, rates.f_a, &mut dy);
    BlochState::from_slice(&dy)
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn rhs_into(y: &[f64], j: f64, eps: f64, u: f64, t1: f64, t2: f64, fa: f64, dy: &mut [f64]) {
    let (sx, sy, sz, n) = (y[0], y[1], y[2], y[3]);
    dy[0] = -2.0 * eps * sy - u * sy * sz - t2 * sx;
    dy[1] = 2.0 * j * sz + 2.0 * eps * sx + u * sx * sz - t2 * sy;
    dy[2] = -2.0 * j * sy - t1 * sz - t1 * fa * n;
    dy[3] = -t1 * n - t1 * fa * sz;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    pub tol: Tolerances,
    pub max_steps: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions { tol: Tolerances::default(), max_steps: 50_000_000 }
    }
}

/// Integrate the Bloch equations over `t_span` and sample on `grid`.
pub fn integrate(
    initial: &BlochState,
    params: &ModelParams,
    drive: &DriveSpec,
    t_span: (f64, f64),
    grid: &[f64],
) -> Result<ObservableSeries, MeanFieldError> {
    integrate_with(initial, params, drive, t_span, grid, &IntegrateOptions::default())
}

pub fn integrate_with(
    initial: &BlochState,
    params: &ModelParams,
    drive: &DriveSpec,
    t_span: (f64, f64),
    grid: &[f64],
    options: &IntegrateOptions,
) -> Result<ObservableSeries, MeanFieldError> {
    drive.validate()?;
    let (start, end) = t_span;
    for &t in grid {
        if !(start..=end).contains(&t) {
            return Err(MeanFieldError::GridOutsideSpan { t, start, end });
        }
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(MeanFieldError::UnsortedGrid);
    }
    let rates = params.rates();
    let (u, t1, t2, fa) = (params.u, rates.t1_inv, rates.t2_inv, rates.f_a);
    let params = *params;
    let drive = *drive;
    let rhs = move |t: f64, y: &[f64], dy: &mut [f64]| {
        let (j, eps) = drive.couplings(&params, t);
        rhs_into(y, j, eps, u, t1, t2, fa, dy);
    };
    let mut solver = Dopri5::new(rhs, start, initial.to_array().to_vec(), options.tol);
    let mut series = ObservableSeries::with_capacity(grid.len());
    for &t in grid {
        solver
            .integrate_to(t, options.max_steps)
            .map_err(|source| MeanFieldError::Integration { t: solver.t(), source })?;
        let y = solver.y();
        series.push(t, [y[0], y[1], y[2]], y[3]);
    }
    Ok(series)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Attractive,
    Repulsive,
    Elliptic,
    Saddle,
}

/// Stationary direction of the rescaled dynamics `s/n` at frozen `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub direction: [f64; 3],
    pub stability: Stability,
    #[serde(skip)]
    pub jacobian_eigenvalues: [Complex64; 2],
}

/// Flow of the unit Bloch vector on the sphere with `n` frozen: the
/// tangential part of the first three Bloch equations divided by `n`.
struct SphereFlow {
    j: f64,
    eps: f64,
    g: f64,
    t1: f64,
    t2: f64,
    fa: f64,
}

impl SphereFlow {
    fn new(params: &ModelParams, n_fixed: f64) -> Self {
        let r = params.rates();
        SphereFlow {
            j: params.j,
            eps: params.epsilon,
            g: params.u * n_fixed,
            t1: r.t1_inv,
            t2: r.t2_inv,
            fa: r.f_a,
        }
    }

    fn scale(&self) -> f64 {
        self.j.abs() + self.eps.abs() + self.g.abs() + self.t1 + self.t2 + 1e-300
    }

    fn field(&self, x: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(
            -2.0 * self.eps * x.y - self.g * x.y * x.z - self.t2 * x.x,
            2.0 * self.j * x.z + 2.0 * self.eps * x.x + self.g * x.x * x.z - self.t2 * x.y,
            -2.0 * self.j * x.y - self.t1 * x.z - self.t1 * self.fa,
        )
    }

    fn field_jacobian(&self, x: &Vector3<f64>) -> nalgebra::Matrix3<f64> {
        let (e, g) = (self.eps, self.g);
        nalgebra::Matrix3::new(
            -self.t2, -2.0 * e - g * x.z, -g * x.y,
            2.0 * e + g * x.z, -self.t2, 2.0 * self.j + g * x.x,
            0.0, -2.0 * self.j, -self.t1,
        )
    }

    fn tangential(&self, x: &Vector3<f64>) -> Vector3<f64> {
        let v = self.field(x);
        v - x * x.dot(&v)
    }

    /// Jacobian of the tangential flow in the orthonormal tangent frame `e`.
    fn tangent_jacobian(&self, x: &Vector3<f64>, e: &[Vector3<f64>; 2]) -> Matrix2<f64> {
        let dv = self.field_jacobian(x);
        let radial = x.dot(&self.field(x));
        Matrix2::from_fn(|a, b| e[a].dot(&(dv * e[b])) - if a == b { radial } else { 0.0 })
    }
}

fn tangent_frame(x: &Vector3<f64>) -> [Vector3<f64>; 2] {
    let helper = if x.x.abs() < 0.6 { Vector3::x() } else { Vector3::y() };
    let e1 = (helper - x * x.dot(&helper)).normalize();
    let e2 = x.cross(&e1);
    [e1, e2]
}

fn start_directions() -> Vec<Vector3<f64>> {
    let mut out = Vec::new();
    // 26 lattice directions of the cube
    for i in -1i32..=1 {
        for j in -1i32..=1 {
            for k in -1i32..=1 {
                if (i, j, k) != (0, 0, 0) {
                    out.push(Vector3::new(i as f64, j as f64, k as f64).normalize());
                }
            }
        }
    }
    // plus a Fibonacci lattice
    let m = 174;
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    for i in 0..m {
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / m as f64;
        let r = (1.0 - z * z).sqrt();
        let phi = golden * i as f64;
        out.push(Vector3::new(r * phi.cos(), r * phi.sin(), z));
    }
    out
}

fn newton_on_sphere(flow: &SphereFlow, start: Vector3<f64>) -> Option<Vector3<f64>> {
    let tol = 1e-13 * flow.scale();
    let mut x = start;
    for _ in 0..100 {
        let e = tangent_frame(&x);
        let g = flow.tangential(&x);
        let rhs = nalgebra::Vector2::new(e[0].dot(&g), e[1].dot(&g));
        if rhs.norm() < tol {
            return Some(x);
        }
        let jac = flow.tangent_jacobian(&x, &e);
        let delta = jac.lu().solve(&(-rhs))?;
        let len = delta.norm();
        let delta = if len > 0.5 { delta * (0.5 / len) } else { delta };
        x = (x + e[0] * delta.x + e[1] * delta.y).normalize();
    }
    let g = flow.tangential(&x);
    (g.norm() < 1e3 * tol).then_some(x)
}

fn classify(eigs: &[Complex64; 2], scale: f64) -> Stability {
    let tol = 1e-9 * scale;
    let sign = |z: &Complex64| {
        if z.re > tol {
            1
        } else if z.re < -tol {
            -1
        } else {
            0
        }
    };
    match (sign(&eigs[0]), sign(&eigs[1])) {
        (-1, -1) => Stability::Attractive,
        (1, 1) => Stability::Repulsive,
        (0, 0) => Stability::Elliptic,
        (a, b) if a * b < 0 => Stability::Saddle,
        // one marginal direction: report the sign of the other
        (a, b) if a + b < 0 => Stability::Attractive,
        _ => Stability::Repulsive,
    }
}

/// All stationary directions of the rescaled mean-field flow at frozen `n`.
///
/// Multi-start Newton iteration on the sphere; each root is classified by
/// the eigenvalues of the flow's Jacobian in the tangent plane.
pub fn find_fixed_points(params: &ModelParams, n_fixed: f64) -> Result<Vec<FixedPoint>, MeanFieldError> {
    if !(n_fixed > 0.0) {
        return Err(MeanFieldError::InvalidParticleNumber(n_fixed));
    }
    let flow = SphereFlow::new(params, n_fixed);
    let mut roots: Vec<Vector3<f64>> = Vec::new();
    for start in start_directions() {
        if let Some(x) = newton_on_sphere(&flow, start) {
            if roots.iter().all(|r| (r - x).norm() > 1e-8) {
                roots.push(x);
            }
        }
    }
    if roots.is_empty() {
        return Err(MeanFieldError::NoFixedPoints);
    }
    roots.sort_by(|a, b| {
        a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)).then(a.z.total_cmp(&b.z))
    });
    Ok(roots
        .into_iter()
        .map(|x| {
            let e = tangent_frame(&x);
            let jac = flow.tangent_jacobian(&x, &e);
            let tr = jac.trace();
            let det = jac.determinant();
            let disc = Complex64::new(0.25 * tr * tr - det, 0.0).sqrt();
            let eigs = [Complex64::new(0.5 * tr, 0.0) + disc, Complex64::new(0.5 * tr, 0.0) - disc];
            FixedPoint {
                direction: [x.x, x.y, x.z],
                stability: classify(&eigs, flow.scale()),
                jacobian_eigenvalues: eigs,
            }
        })
        .collect())
}

/// Tangential residual `|ds/dt|` (per particle) of the frozen-n flow at a
/// direction on the sphere.
pub fn fixed_point_residual(params: &ModelParams, n_fixed: f64, direction: [f64; 3]) -> f64 {
    let flow = SphereFlow::new(params, n_fixed);
    flow.tangential(&Vector3::from(direction)).norm()
}

/// Locate the interaction strength `Un` in `[lo, hi]` at which the number of
/// fixed points changes, by bisection to relative width `rel_tol`.
pub fn bifurcation_threshold(
    params: &ModelParams,
    n_fixed: f64,
    lo: f64,
    hi: f64,
    rel_tol: f64,
) -> Result<f64, MeanFieldError> {
    let count = |un: f64| -> Result<usize, MeanFieldError> {
        Ok(find_fixed_points(&params.with_u(un / n_fixed), n_fixed)?.len())
    };
    let (mut a, mut b) = (lo, hi);
    let ca = count(a)?;
    if count(b)? == ca {
        return Err(MeanFieldError::NoBifurcation { lo, hi });
    }
    while (b - a) > rel_tol * 0.5 * (a.abs() + b.abs()) {
        let mid = 0.5 * (a + b);
        if count(mid)? == ca {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}
