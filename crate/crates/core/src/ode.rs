//! Dormand–Prince 5(4) integrator with step-size control and dense output.
//!
//! Works on flat `f64` state vectors; complex states are stored as
//! interleaved `(re, im)` pairs by the callers.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("exceeded {max_steps} steps before reaching t = {target}, stopped at t = {t}")]
    TooManySteps { t: f64, target: f64, max_steps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rtol: 1e-9, atol: 1e-12 }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// difference between the 5th and 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// continuous extension (Shampine)
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Right-hand side `dy/dt = f(t, y)` written into the output slice.
pub trait Rhs {
    fn eval(&mut self, t: f64, y: &[f64], dy: &mut [f64]);
}

impl<F: FnMut(f64, &[f64], &mut [f64])> Rhs for F {
    fn eval(&mut self, t: f64, y: &[f64], dy: &mut [f64]) {
        self(t, y, dy)
    }
}

pub struct Dopri5<F> {
    rhs: F,
    tol: Tolerances,
    t: f64,
    y: Vec<f64>,
    h: f64,
    h_min: f64,
    k: [Vec<f64>; 7],
    y_stage: Vec<f64>,
    y_new: Vec<f64>,
    // state of the last accepted step, for dense output
    t_prev: f64,
    h_prev: f64,
    dense: [Vec<f64>; 5],
    fsal_valid: bool,
    n_accepted: usize,
    n_rejected: usize,
    fac_old: f64,
}

impl<F: Rhs> Dopri5<F> {
    pub fn new(rhs: F, t0: f64, y0: Vec<f64>, tol: Tolerances) -> Self {
        let n = y0.len();
        let zeros = || vec![0.0; n];
        Dopri5 {
            rhs,
            tol,
            t: t0,
            y: y0,
            h: 0.0,
            h_min: 0.0,
            k: [zeros(), zeros(), zeros(), zeros(), zeros(), zeros(), zeros()],
            y_stage: zeros(),
            y_new: zeros(),
            t_prev: t0,
            h_prev: 0.0,
            dense: [zeros(), zeros(), zeros(), zeros(), zeros()],
            fsal_valid: false,
            n_accepted: 0,
            n_rejected: 0,
            fac_old: 1e-4,
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Current step-size proposal (0 before the first step).
    pub fn step_size(&self) -> f64 {
        self.h
    }

    /// Override the next step-size proposal; 0 lets the solver choose.
    pub fn set_step_size(&mut self, h: f64) {
        self.h = h;
    }

    pub fn stats(&self) -> (usize, usize) {
        (self.n_accepted, self.n_rejected)
    }

    /// Restart from a new state (e.g. after a discontinuous jump). Keeps the
    /// current step size as a first guess.
    pub fn reset(&mut self, t: f64, y: &[f64]) {
        self.t = t;
        self.y.copy_from_slice(y);
        self.fsal_valid = false;
    }

    fn error_weight(&self, i: usize) -> f64 {
        self.tol.atol + self.tol.rtol * self.y[i].abs().max(self.y_new[i].abs())
    }

    fn initial_step(&mut self) -> f64 {
        // Hairer, Nørsett & Wanner, starting step heuristic
        let n = self.y.len();
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..n {
            let sc = self.tol.atol + self.tol.rtol * self.y[i].abs();
            d0 += (self.y[i] / sc).powi(2);
            d1 += (self.k[0][i] / sc).powi(2);
        }
        let d0 = (d0 / n as f64).sqrt();
        let d1 = (d1 / n as f64).sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        for i in 0..n {
            self.y_stage[i] = self.y[i] + h0 * self.k[0][i];
        }
        (self.rhs).eval(self.t + h0, &self.y_stage, &mut self.k[1]);
        let mut d2 = 0.0;
        for i in 0..n {
            let sc = self.tol.atol + self.tol.rtol * self.y[i].abs();
            d2 += ((self.k[1][i] - self.k[0][i]) / sc).powi(2);
        }
        let d2 = (d2 / n as f64).sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1)
    }

    /// Take one accepted step, never stepping past `t_limit`.
    pub fn step(&mut self, t_limit: f64) -> Result<(), OdeError> {
        let n = self.y.len();
        if !self.fsal_valid {
            (self.rhs).eval(self.t, &self.y, &mut self.k[0]);
            self.fsal_valid = true;
            if self.h <= 0.0 {
                self.h = self.initial_step();
            }
        }
        let span = t_limit - self.t;
        self.h_min = 16.0 * f64::EPSILON * self.t.abs().max(span.abs()).max(1e-300);
        loop {
            let mut h = self.h.min(span);
            let last = h >= span;
            if last {
                h = span;
            }
            if h < self.h_min && !last {
                return Err(OdeError::StepUnderflow { t: self.t, h });
            }
            let t = self.t;
            let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
            let y = &self.y;
            let ys = &mut self.y_stage;
            for i in 0..n {
                ys[i] = y[i] + h * A21 * k1[i];
            }
            self.rhs.eval(t + C2 * h, ys, k2);
            for i in 0..n {
                ys[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            self.rhs.eval(t + C3 * h, ys, k3);
            for i in 0..n {
                ys[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            self.rhs.eval(t + C4 * h, ys, k4);
            for i in 0..n {
                ys[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            self.rhs.eval(t + C5 * h, ys, k5);
            for i in 0..n {
                ys[i] = y[i]
                    + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            self.rhs.eval(t + h, ys, k6);
            let yn = &mut self.y_new;
            for i in 0..n {
                yn[i] = y[i]
                    + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            self.rhs.eval(t + h, yn, k7);

            let mut err = 0.0;
            for i in 0..n {
                let e = h
                    * (E1 * self.k[0][i]
                        + E3 * self.k[2][i]
                        + E4 * self.k[3][i]
                        + E5 * self.k[4][i]
                        + E6 * self.k[5][i]
                        + E7 * self.k[6][i]);
                err += (e / self.error_weight(i)).powi(2);
            }
            let err = (err / n.max(1) as f64).sqrt();
            if !err.is_finite() {
                if h <= self.h_min {
                    return Err(OdeError::NonFinite { t: self.t });
                }
                self.h = 0.1 * h;
                self.n_rejected += 1;
                continue;
            }

            // PI step-size controller
            let fac11 = err.powf(0.2 - 0.04 * 0.75);
            let fac = (fac11 / self.fac_old.powf(0.04)) / 0.9;
            let fac = fac.clamp(0.1, 5.0);
            let h_new = h / fac;
            if err <= 1.0 {
                self.fac_old = err.max(1e-4);
                let [k1, _, k3, k4, k5, k6, k7] = &self.k;
                let [r1, r2, r3, r4, r5] = &mut self.dense;
                for i in 0..n {
                    let dy = self.y_new[i] - self.y[i];
                    let bspl = h * k1[i] - dy;
                    r1[i] = self.y[i];
                    r2[i] = dy;
                    r3[i] = bspl;
                    r4[i] = dy - h * k7[i] - bspl;
                    r5[i] = h
                        * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]
                            + D7 * k7[i]);
                }
                self.t_prev = self.t;
                self.h_prev = h;
                self.t = if last { t_limit } else { self.t + h };
                std::mem::swap(&mut self.y, &mut self.y_new);
                self.k.swap(0, 6);
                self.n_accepted += 1;
                if !last || h_new < self.h {
                    self.h = h_new;
                }
                return Ok(());
            }
            self.n_rejected += 1;
            self.h = h / (fac11 / 0.9).min(5.0);
        }
    }

    /// Interpolated state inside the last accepted step, `t` in
    /// `[t_prev, t]`.
    pub fn dense_output(&self, t: f64, out: &mut [f64]) {
        let theta = if self.h_prev > 0.0 { (t - self.t_prev) / self.h_prev } else { 1.0 };
        let theta1 = 1.0 - theta;
        let [r1, r2, r3, r4, r5] = &self.dense;
        for i in 0..out.len() {
            out[i] = r1[i] + theta * (r2[i] + theta1 * (r3[i] + theta * (r4[i] + theta1 * r5[i])));
        }
    }

    pub fn last_step_start(&self) -> f64 {
        self.t_prev
    }

    /// Advance exactly to `t_target`.
    pub fn integrate_to(&mut self, t_target: f64, max_steps: usize) -> Result<(), OdeError> {
        let mut steps = 0;
        while self.t < t_target {
            if steps >= max_steps {
                return Err(OdeError::TooManySteps { t: self.t, target: t_target, max_steps });
            }
            self.step(t_target)?;
            steps += 1;
        }
        Ok(())
    }
}
