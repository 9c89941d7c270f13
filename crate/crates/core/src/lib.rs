//! Two-mode Bose–Einstein condensate with phase noise and particle loss:
//! exact many-body dynamics, truncated mean-field dynamics, decay modes and
//! linear response.

pub mod linalg;
pub mod meanfield;
pub mod model;
pub mod ode;
pub mod quantum;
pub mod response;
pub mod series;
pub mod steadystate;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use model::{ModelError, ModelParams};
pub use series::ObservableSeries;
