use thiserror::Error;

/// Errors raised by the geometry, meshing, assembly and solver layers.
///
/// Scalar payloads are stored as `f64` regardless of the working precision.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("metric is not positive definite at {point:?} (min eigenvalue {min_eigenvalue:e})")]
    NonPositiveDefiniteMetric { point: Vec<f64>, min_eigenvalue: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("degenerate mesh: {0}")]
    DegenerateMesh(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("domain is not strictly convex (kappa1 = {kappa1:e})")]
    NotStrictlyConvex { kappa1: f64 },

    #[error("non-finite residual entry at vertex {vertex}")]
    NonFiniteResidual { vertex: usize },

    #[error("Newton iteration diverged after {iterations} iterations: {reason}")]
    NewtonDiverged { iterations: usize, reason: String, residual_history: Vec<f64> },

    #[error("linear solve failed: {0}")]
    LinearSolveFailed(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
