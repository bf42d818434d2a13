use serde::{Deserialize, Serialize};

use crate::assembly::{DiscreteField, PenalizedProblem};
use crate::error::{Error, Result};
use crate::sparse::{norm2, norm_inf};
use crate::Real;

/// Damped Newton parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonSettings<T> {
    /// Stop once `‖R‖_∞ ≤ tol_residual`.
    pub tol_residual: T,
    pub max_iter: usize,
    /// Step reduction factor of the backtracking line search.
    pub backtrack: T,
    /// Smallest admissible step length.
    pub min_step: T,
    /// Relative 2-norm residual demanded from each linear solve.
    pub linear_tol: T,
}

impl<T: Real> Default for NewtonSettings<T> {
    fn default() -> Self {
        NewtonSettings {
            tol_residual: T::default_residual_tol(),
            max_iter: 50,
            backtrack: T::lit(0.5),
            min_step: T::lit(0.5f64.powi(20)),
            linear_tol: T::default_linear_tol(),
        }
    }
}

impl<T: Real> NewtonSettings<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_residual > T::zero()) {
            return Err(Error::InvalidArgument { name: "newton.tol_residual", reason: "must be positive".into() });
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidArgument { name: "newton.max_iter", reason: "must be at least 1".into() });
        }
        if !(self.backtrack > T::zero() && self.backtrack < T::one()) {
            return Err(Error::InvalidArgument { name: "newton.backtrack", reason: "must lie in (0, 1)".into() });
        }
        if !(self.min_step > T::zero() && self.min_step <= T::one()) {
            return Err(Error::InvalidArgument { name: "newton.min_step", reason: "must lie in (0, 1]".into() });
        }
        if !(self.linear_tol > T::zero()) {
            return Err(Error::InvalidArgument { name: "newton.linear_tol", reason: "must be positive".into() });
        }
        Ok(())
    }
}

/// Outcome of one penalized solve.
#[derive(Clone, Debug)]
pub struct SolveResult<T> {
    pub u: DiscreteField<T>,
    pub converged: bool,
    pub iterations: usize,
    /// `‖R‖_∞` before each Newton step and after the last one.
    pub residual_history: Vec<T>,
    /// `max |Du|_σ` over triangle centroids.
    pub sup_grad: T,
    /// `υ + εu` per vertex.
    pub lambda_field: Vec<T>,
    /// `φ/W_b` per boundary vertex.
    pub contact_cosine: Vec<T>,
    /// `−(1/Vol_σ) ∮ φ/W_b dA_σ`.
    pub lambda_compat: T,
}

impl<T: Real> SolveResult<T> {
    pub fn final_residual(&self) -> T {
        *self.residual_history.last().expect("history is never empty")
    }
}

const ARMIJO: f64 = 1e-4;

/// Damped Newton iteration for `R(u) = 0`.
///
/// A full Newton step is tried first, then a full lagged-diffusivity step,
/// then backtracking along each; every accepted step satisfies the Armijo
/// condition on `‖R‖₂`.
///
/// Once the tolerance is met one further full step is tried and kept when it
/// lowers the residual, which pushes the result to the round-off floor.
pub fn solve_penalized<T: Real>(
    p: &PenalizedProblem<T>,
    u_init: &DiscreteField<T>,
    s: &NewtonSettings<T>,
) -> Result<SolveResult<T>> {
    s.validate()?;
    let mut u = DiscreteField::new(u_init.to_vec(), p.num_vertices())?.into_vec();
    let mut r = p.residual(&u)?;
    let mut history = vec![norm_inf(&r)];
    let mut iterations = 0;
    let mut converged = false;
    let diverged = |iterations: usize, reason: String, history: &[T]| Error::NewtonDiverged {
        iterations,
        reason,
        residual_history: history.iter().map(|v| v.as_f64()).collect(),
    };
    while iterations < s.max_iter {
        let res_inf = *history.last().unwrap();
        if res_inf <= s.tol_residual {
            converged = true;
            break;
        }
        let r2 = norm2(&r);
        let rhs: Vec<T> = r.iter().map(|&v| -v).collect();
        let newton = p.jacobian(&u)?.solve(&rhs, s.linear_tol)?;
        let accept = |delta: &[T], step: T| -> Option<(Vec<T>, Vec<T>)> {
            let trial: Vec<T> = u.iter().zip(delta).map(|(&a, &d)| a + step * d).collect();
            let rt = p.residual(&trial).ok()?;
            (norm2(&rt) <= (T::one() - T::lit(ARMIJO) * step) * r2).then_some((trial, rt))
        };
        let mut next = accept(&newton, T::one());
        let mut picard = None;
        if next.is_none() {
            // Far from the solution the lagged-diffusivity step is far more robust.
            let d = p.lagged_jacobian(&u)?.solve(&rhs, s.linear_tol)?;
            next = accept(&d, T::one());
            picard = Some(d);
        }
        for delta in [Some(&newton), picard.as_ref()].into_iter().flatten() {
            let mut step = s.backtrack;
            while next.is_none() && step >= s.min_step {
                next = accept(delta, step);
                step *= s.backtrack;
            }
        }
        match next {
            Some((un, rn)) => {
                u = un;
                r = rn;
            }
            None => return Err(diverged(iterations, "line search failed at minimum step".into(), &history)),
        }
        iterations += 1;
        history.push(norm_inf(&r));
    }
    if !converged && *history.last().unwrap() <= s.tol_residual {
        converged = true;
    }
    if converged {
        if let Ok(jac) = p.jacobian(&u) {
            let rhs: Vec<T> = r.iter().map(|&v| -v).collect();
            if let Ok(delta) = jac.solve(&rhs, s.linear_tol) {
                let trial: Vec<T> = u.iter().zip(&delta).map(|(&a, &d)| a + d).collect();
                if let Ok(rt) = p.residual(&trial) {
                    if norm_inf(&rt) < *history.last().unwrap() {
                        u = trial;
                        iterations += 1;
                        history.push(norm_inf(&rt));
                    }
                }
            }
        }
    }
    let result = SolveResult {
        sup_grad: p.sup_grad(&u),
        lambda_field: p.lambda_field(&u),
        contact_cosine: p.contact_cosines(&u)?,
        lambda_compat: p.lambda_from_compatibility(&u)?,
        u: DiscreteField::new(u, p.num_vertices())?,
        converged,
        iterations,
        residual_history: history,
    };
    Ok(result)
}

/// `u_{ε,υ} = u_{ε,0} − υ/ε`.
pub fn shift_solution<T: Real>(u_eps0: &DiscreteField<T>, eps: T, upsilon: T) -> Result<DiscreteField<T>> {
    if !(eps > T::zero()) {
        return Err(Error::InvalidArgument { name: "eps", reason: "must be positive".into() });
    }
    Ok(u_eps0.shifted(upsilon / eps))
}

/// `υ_ε = ε (u_{ε,0}(anchor) − u₀(anchor))`, so that the shifted field takes
/// the value `u0_anchor` at the anchor vertex.
pub fn select_upsilon<T: Real>(u_eps0: &DiscreteField<T>, eps: T, u0_anchor: T, anchor: usize) -> Result<T> {
    if !(eps > T::zero()) {
        return Err(Error::InvalidArgument { name: "eps", reason: "must be positive".into() });
    }
    let value = *u_eps0
        .get(anchor)
        .ok_or_else(|| Error::InvalidArgument { name: "anchor", reason: format!("vertex {anchor} out of range") })?;
    Ok(eps * (value - u0_anchor))
}
