//! Manufactured-solution studies and the validation experiments.

pub mod bundle;
pub mod config;
pub mod custom;
pub mod example1;
pub mod example2;
pub mod manufactured;
pub mod norms;

pub use bundle::Bundle;
pub use config::{ExperimentConfig, ExperimentId};
pub use custom::{run_experiment, Outcome, Setup};
pub use manufactured::{ExactSolution, FieldGradients, ManufacturedCase};
pub use norms::{max_errors_over_time, max_relative_h1, observed_rate, state_errors, ErrorMode, FieldErrors};

use crate::assembly::PhysicalParams;

/// Material parameters of the manufactured-solution experiments.
pub fn example1_params() -> PhysicalParams {
    PhysicalParams {
        lambda: 1e2,
        mu: 1e2,
        c0: 1.0,
        alpha: 1.0,
        alpha_t: 1e-3,
        alpha_m: 1e-5,
        c_d: 1.0,
        theta0: 1.0,
        l_stab: 1.0,
    }
}

pub fn example1_case() -> ManufacturedCase {
    ManufacturedCase::new(example1_params(), 1e-5, 1e-5)
}
