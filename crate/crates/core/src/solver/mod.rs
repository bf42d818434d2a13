//! Damped Newton for the penalized problem and the ε → 0 continuation.

mod continuation;
mod newton;
mod profiles;

pub use continuation::{
    check_hypotheses, geometric_schedule, run_continuation, validate_schedule, ContinuationAborted, ContinuationReport,
    EpsRecord, HypothesisReport, RICCI_TOL,
};
pub use newton::{select_upsilon, shift_solution, solve_penalized, NewtonSettings, SolveResult};
pub use profiles::{barrier_constant, compatible_u0, discrete_mean_curvature, interior_bump, PhiSpec, U0Spec};
