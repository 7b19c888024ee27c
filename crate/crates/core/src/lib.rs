//! Polytopic computation of M-step hold control invariant sets, and their
//! robust counterparts, for discrete-time LTI systems.

pub mod disturbance;
pub mod error;
pub mod invariance;
pub mod json;
pub mod lp;
pub mod lti;
pub mod polytope;
pub mod problem;
pub mod properties;
pub mod verify;

pub use disturbance::DisturbanceSchedule;
pub use error::{Error, Result};
pub use invariance::{compute_cinf, compute_rcinf, pre_m, pre_m_robust, InvariantOptions, InvariantSetResult};
pub use lp::{LinearProgram, LpOutcome, LpStatus};
pub use lti::{ContinuousLtiModel, DiscreteLtiModel, DiscretizationMethod};
pub use polytope::Polytope;
pub use problem::{DisturbanceSpec, ModelSpec, ProblemOptions, ProblemSpec, SetSpec};
pub use properties::{run_checks, CheckReport, CheckRow, Status};
pub use verify::{
    check_maximality, find_counterexample, grid_oracle_cinf, sine_truth_check, validate_invariance,
    CounterexampleReport, GridOracleResult, InvarianceReport, MaximalityReport, SineTruthReport,
};
