//! Exact many-body dynamics: block-structured density matrices, the master
//! equation, quantum trajectories and observables.
//!
//! Every operator of the model conserves the total particle number except
//! the loss operators, which lower it by one. States are therefore stored
//! per number sector and coherences between sectors are never formed.

mod master;
mod mcwf;
mod observables;
mod state;

use thiserror::Error;

pub use master::{propagate_master, MasterOptions, MasterRun};
pub use mcwf::{mcwf_ensemble, JumpKind, McwfEnsemble, McwfOptions, TrajectoryFailure};
pub use observables::{
    covariances, expectations, husimi_q, measurement_distributions, reduced_spdm, CovarianceSet, Expectations,
    HusimiGrid, MeasurementDistributions, ReducedSpdm, PHI_BINS,
};
pub use state::{BlockDensity, JumpOperatorSet, QuantumState};

use crate::meanfield::MeanFieldError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantumError {
    #[error("initial particle number {n} exceeds the master-equation limit {limit}")]
    TooManyParticles { n: usize, limit: usize },
    #[error("step halving did not converge: observable change {achieved:e} after {halvings} halvings (target {target:e})")]
    StepHalving { achieved: f64, target: f64, halvings: usize },
    #[error("quantum trajectories need a pure initial state")]
    NotPure,
    #[error("reduced density matrix undefined for the vacuum")]
    Vacuum,
    #[error("need at least one trajectory")]
    NoTrajectories,
    #[error("every trajectory failed: {0}")]
    AllTrajectoriesFailed(String),
    #[error("output time {t} outside the span [{start}, {end}] or grid unsorted")]
    BadGrid { t: f64, start: f64, end: f64 },
    #[error("state norm must be positive")]
    ZeroNorm,
    #[error(transparent)]
    Drive(#[from] MeanFieldError),
}

pub(crate) fn check_grid(t_span: (f64, f64), grid: &[f64]) -> Result<(), QuantumError> {
    let (start, end) = t_span;
    for (k, &t) in grid.iter().enumerate() {
        if !(start..=end).contains(&t) || (k > 0 && t < grid[k - 1]) {
            return Err(QuantumError::BadGrid { t, start, end });
        }
    }
    Ok(())
}
