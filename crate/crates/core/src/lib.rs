//! Measurement-driven quantum trajectories of N-level spin systems under
//! continuous `J_z` measurement, with the stabilizing feedback laws and the
//! Lyapunov/Monte Carlo machinery used to check their convergence rates.

pub mod analysis;
pub mod bures;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod integrator;
pub mod linalg;
pub mod oracles;
pub mod output;
pub mod sampling;
pub mod spin;
pub mod state;

pub use bures::{bures_distance, bures_to_eigenstate, bures_to_set, expectation};
pub use dynamics::{feedback_value, normalize, p_bar, variance_jz, FeedbackLaw, UnnormalizedState};
pub use ensemble::{preset, run_ensemble, EnsembleConfig, EnsembleStats, Preset};
pub use error::{Error, Result};
pub use integrator::{
    simulate_ode, simulate_sme, simulate_zakai_pair, sme_step, NoiseRecord, PiecewiseConstant,
    RecordSpec, SdeConfig, TrajectoryRecord,
};
pub use linalg::CMatrix;
pub use spin::{build_operators, Model, ModelParams, PureTarget, SpinOperators};
pub use state::{project_to_state_space, DensityMatrix, ProjectionPolicy, Tolerances, Validity};
