//! Long-term type-2 diabetes progression model with an exercise input, and a
//! receding-horizon controller that prescribes exercise to keep basal glucose
//! normal.
//!
//! * [`model`]: state, parameters and vector field.
//! * [`integrator`]: fixed-step RK4 under piecewise-constant inputs.
//! * [`mpc`]: window cost, per-period optimization, closed loop.
//! * [`prescription`]: equivalent input <-> session length and weekly dose.
//! * [`scenario`]: scenario files, runs and CSV/JSON outputs.

pub mod error;
pub mod integrator;
pub mod model;
pub mod mpc;
pub mod params;
pub mod prescription;
pub mod scenario;

pub use error::{ConfigError, ControlError, IntegrationError, ModelError, PrescriptionError, ScenarioError};
pub use integrator::{integrate, step, InputSchedule, Sample, TimeGrid, Trajectory};
pub use model::{apoptosis_base, proliferation_base, psi1, psi2, vector_field, ModelParams, StateVector};
pub use mpc::{horizon_cost, run_closed_loop, solve_period, ControlDecision, ControllerConfig, SolverSettings};
pub use params::ParameterSet;
pub use prescription::{weekly_dose, ExerciseProgram, PrescriptionMapper, WeeklyDose};
pub use scenario::{run_scenario, Mode, RunOutput, RunReport, ScenarioConfig};
