//! Checks of computed sets that do not go through the polytope pipeline:
//! a lattice oracle, sampled certificates, the sampled-data counterexample and
//! a closed-loop run of the nonlinear example.

pub mod certificates;
pub mod counterexample;
pub mod oracle;
pub mod sine;

pub use certificates::{check_maximality, validate_invariance, InvarianceReport, MaximalityReport};
pub use counterexample::{
    find_counterexample, find_counterexample_with_sets, CounterexampleOptions, CounterexampleProblem,
    CounterexampleReport, Violation,
};
pub use oracle::{grid_oracle_cinf, suggested_input_samples, GridOracleResult, OracleComparison};
pub use sine::{sine_truth_check, SineTruthReport};
