use std::fmt;

use serde::Serialize;

use super::newton::{select_upsilon, shift_solution, solve_penalized, NewtonSettings};
use super::profiles::barrier_constant;
use crate::assembly::{DiscreteField, PenalizedProblem};
use crate::domain::boundary_convexity;
use crate::error::{Error, Result};
use crate::geometry::ricci_min_eigenvalue;
use crate::Real;

/// Ricci curvature is accepted as nonnegative above `−RICCI_TOL`.
pub const RICCI_TOL: f64 = 1e-8;

/// Diagnostics of `(∗_{ε,0})` at one ε.
#[derive(Clone, Debug, Serialize)]
pub struct EpsRecord<T> {
    pub eps: T,
    /// `υ_ε` selected by the anchor normalization.
    pub upsilon: T,
    /// Weighted mean of `ε u_{ε,0}`.
    pub lambda: T,
    /// `max − min` of `ε u_{ε,0}`.
    pub lambda_spread: T,
    pub lambda_compat: T,
    pub sup_grad: T,
    /// `u_{ε,0}` at the anchor vertex.
    pub anchor_value: T,
    pub iterations: usize,
    pub final_residual: T,
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport<T> {
    /// Smallest Ricci eigenvalue over the mesh vertices.
    pub ricci_min: T,
    /// Smallest boundary curvature.
    pub kappa1: T,
    pub ricci_nonnegative: bool,
    pub strictly_convex: bool,
}

/// Result of the ε → 0 continuation.
#[derive(Clone, Debug, Serialize)]
pub struct ContinuationReport<T> {
    pub eps_schedule: Vec<T>,
    pub records: Vec<EpsRecord<T>>,
    pub anchor_vertex: usize,
    pub anchor_point: [T; 2],
    /// `u₀` at the anchor.
    pub u0_anchor: T,
    /// Barrier constant `M`.
    pub barrier: T,
    pub hypotheses: HypothesisReport<T>,
    pub warnings: Vec<String>,
    /// All ε of the schedule converged.
    pub complete: bool,
    pub lambda_final: Option<T>,
    pub lambda_compat_final: Option<T>,
    /// Contact-angle cosines at the smallest ε.
    pub contact_cosine: Vec<T>,
    /// Shifted and normalized solution at the smallest ε.
    #[serde(skip)]
    pub u_final: Option<DiscreteField<T>>,
    /// `u_{ε,0}` at the smallest ε.
    #[serde(skip)]
    pub u_eps0_final: Option<DiscreteField<T>>,
}

/// Continuation stopped at the first failing ε; carries everything computed so far.
#[derive(Debug)]
pub struct ContinuationAborted<T> {
    pub partial: Option<Box<ContinuationReport<T>>>,
    pub source: Error,
}

impl<T: fmt::Debug> fmt::Display for ContinuationAborted<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let done = self.partial.as_ref().map_or(0, |p| p.records.len());
        write!(f, "continuation aborted after {done} completed eps values: {}", self.source)
    }
}

impl<T: fmt::Debug> std::error::Error for ContinuationAborted<T> {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

impl<T> From<Error> for ContinuationAborted<T> {
    fn from(source: Error) -> Self {
        ContinuationAborted { partial: None, source }
    }
}

/// Geometric schedule from `first` to `last` with `count` points.
pub fn geometric_schedule(first: f64, last: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![first],
        _ => (0..count).map(|k| first * (last / first).powf(k as f64 / (count - 1) as f64)).collect(),
    }
}

pub fn validate_schedule<T: Real>(eps: &[T]) -> Result<()> {
    if eps.is_empty() {
        return Err(Error::InvalidArgument { name: "eps_schedule", reason: "must be nonempty".into() });
    }
    if eps.iter().any(|e| !(*e > T::zero() && e.is_finite())) {
        return Err(Error::InvalidArgument { name: "eps_schedule", reason: "entries must be positive".into() });
    }
    if eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument { name: "eps_schedule", reason: "must be strictly decreasing".into() });
    }
    Ok(())
}

/// Checks Ric ≥ 0 at the mesh vertices and strict convexity of the boundary.
pub fn check_hypotheses<T: Real>(p: &PenalizedProblem<T>) -> Result<HypothesisReport<T>> {
    let metric = p.discretization().metric();
    let samples: Vec<Vec<T>> = p.domain().vertices().iter().map(|v| v.to_vec()).collect();
    let ricci_min = ricci_min_eigenvalue(&**metric, &samples)?;
    let convexity = boundary_convexity(p.domain(), &**metric)?;
    Ok(HypothesisReport {
        ricci_min,
        kappa1: convexity.kappa1,
        ricci_nonnegative: ricci_min >= -T::lit(RICCI_TOL),
        strictly_convex: convexity.is_strictly_convex(),
    })
}

/// Solves `(∗_{ε,0})` for each ε of the schedule, warm-starting from the
/// previous solution, and normalizes with `υ_ε` so that the shifted field
/// matches `u₀` at the vertex nearest the domain centroid.
pub fn run_continuation<T: Real>(
    template: &PenalizedProblem<T>,
    eps_schedule: &[T],
    u0: &DiscreteField<T>,
    s: &NewtonSettings<T>,
) -> Result<ContinuationReport<T>, ContinuationAborted<T>> {
    validate_schedule(eps_schedule)?;
    s.validate()?;
    let dom = template.domain();
    let u0 = DiscreteField::new(u0.to_vec(), dom.num_vertices())?;
    let anchor_vertex = dom.nearest_vertex(dom.centroid());
    let u0_anchor = u0[anchor_vertex];
    let barrier = barrier_constant(template, &u0)?;
    let hypotheses = check_hypotheses(template)?;
    let mut warnings = Vec::new();
    if !hypotheses.ricci_nonnegative {
        warnings.push(format!(
            "hypothesis violated: Ricci curvature is negative somewhere (min eigenvalue {:e})",
            hypotheses.ricci_min
        ));
    }
    if !hypotheses.strictly_convex {
        warnings
            .push(format!("hypothesis violated: boundary is not strictly convex (kappa1 = {:e})", hypotheses.kappa1));
    }
    let mut report = ContinuationReport {
        eps_schedule: eps_schedule.to_vec(),
        records: Vec::new(),
        anchor_vertex,
        anchor_point: dom.vertices()[anchor_vertex],
        u0_anchor,
        barrier,
        hypotheses,
        warnings,
        complete: false,
        lambda_final: None,
        lambda_compat_final: None,
        contact_cosine: Vec::new(),
        u_final: None,
        u_eps0_final: None,
    };
    let mut guess = u0.clone();
    let mut previous: Option<(T, T)> = None;
    for &eps in eps_schedule {
        let abort = |report: ContinuationReport<T>, source: Error| ContinuationAborted {
            partial: Some(Box::new(report)),
            source,
        };
        if let Some((eps_prev, lambda_prev)) = previous {
            // u_ε ≈ λ/ε + u^∞
            let jump = lambda_prev * (T::one() / eps - T::one() / eps_prev);
            guess = guess.shifted(-jump);
        }
        let p = match template.with_eps(eps) {
            Ok(p) => p.with_upsilon(T::zero()),
            Err(e) => return Err(abort(report, e)),
        };
        let result = match solve_penalized(&p, &guess, s) {
            Ok(r) if r.converged => r,
            Ok(r) => {
                let e = Error::NewtonDiverged {
                    iterations: r.iterations,
                    reason: format!("no convergence within {} iterations at eps = {eps:e}", s.max_iter),
                    residual_history: r.residual_history.iter().map(|v| v.as_f64()).collect(),
                };
                return Err(abort(report, e));
            }
            Err(e) => return Err(abort(report, e)),
        };
        let upsilon = select_upsilon(&result.u, eps, u0_anchor, anchor_vertex).map_err(|e| abort(report.clone(), e))?;
        if !(upsilon.abs() < barrier) {
            report
                .warnings
                .push(format!("upsilon = {upsilon:e} at eps = {eps:e} lies outside (-M, M), M = {barrier:e}"));
        }
        let field = &result.lambda_field;
        let (lo, hi) = field.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let lambda = p.weighted_mean(field);
        report.records.push(EpsRecord {
            eps,
            upsilon,
            lambda,
            lambda_spread: hi - lo,
            lambda_compat: result.lambda_compat,
            sup_grad: result.sup_grad,
            anchor_value: result.u[anchor_vertex],
            iterations: result.iterations,
            final_residual: result.final_residual(),
        });
        report.u_final = Some(shift_solution(&result.u, eps, upsilon).map_err(|e| abort(report.clone(), e))?);
        report.lambda_final = Some(lambda);
        report.lambda_compat_final = Some(result.lambda_compat);
        report.contact_cosine = result.contact_cosine.clone();
        previous = Some((eps, lambda));
        guess = result.u.clone();
        report.u_eps0_final = Some(result.u);
    }
    report.complete = true;
    Ok(report)
}
