//! Horizontally explicit, vertically implicit time stepping.
//!
//! One step runs a provisional horizontal momentum update, an implicit
//! solve of the vertical dynamics that also carries the horizontal mass and
//! potential temperature divergence, and a final horizontal momentum update
//! with the time averaged fluxes of the implicit solve.

mod flux;
mod init;
mod state;
mod stepper;

pub use flux::{flux_time_averages, FluxLevels, FluxSet};
pub use init::{
    bubble_state, column_state, hydrostatic_theta_d, isentropic_state, perturbed_state, BubbleParams,
};
pub use state::StateVector;
pub use stepper::{
    biharmonic_viscosity, energy_balance_residual, EnergyBalance, Hevi, Step1Mode, StepReport,
    StepperSettings, VerticalSolution,
};
