//! Constant mean curvature graphs with prescribed contact angle over
//! Riemannian domains, computed through the penalized capillary problem
//! `div(Du/W) = υ + εu` and its `ε → 0` continuation.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix double precision for callers that do not care.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod domain;
pub mod error;
pub mod geometry;
pub mod linalg;
mod real;
pub mod solver;
pub mod sparse;
pub mod verify;

pub use error::{Error, Result};
pub use real::Real;

pub type Domain = domain::TriangulatedDomain<f64>;
pub type Field = assembly::DiscreteField<f64>;
pub type Problem = assembly::PenalizedProblem<f64>;
pub type Disc = assembly::Discretization<f64>;
pub type Report = solver::ContinuationReport<f64>;
pub type Settings = solver::NewtonSettings<f64>;
pub type Metric = std::sync::Arc<dyn geometry::MetricField<f64>>;
