//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::sparse::LinearSolve;

/// Floating-point scalar the geometry, assembly and solver code is generic over.
///
/// Implemented for `f32` and `f64`. Tolerances that must scale with the
/// working precision go through [`Real::fd_step`] and friends rather than
/// hard-coded literals.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + LinearSolve
    + 'static
{
    /// Converts an `f64` literal. Panics only for values the type cannot hold.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Central-difference step for first derivatives at unit chart scale.
    fn fd_step() -> Self {
        Self::lit(1e-5).max(Self::epsilon().cbrt())
    }

    /// Step for second differences; larger than [`Real::fd_step`] since
    /// rounding error grows like `eps / h^2`.
    fn fd_step_second() -> Self {
        Self::lit(1e-4).max(Self::epsilon().powf(Self::lit(0.25)))
    }

    /// Default Newton residual tolerance (1e-10 in double precision).
    fn default_residual_tol() -> Self {
        Self::lit(1e-10).max(Self::epsilon() * Self::lit(1e3))
    }

    /// Relative residual demanded from linear solves (1e-12 in double precision).
    fn default_linear_tol() -> Self {
        Self::lit(1e-12).max(Self::epsilon() * Self::lit(1e2))
    }
}

impl Real for f32 {}
impl Real for f64 {}
