//! Executable checks of existence, uniqueness and the identities behind them.

mod ricci;

pub use ricci::{ricci_identity_error, sample_grid, QuarticTestFunction, TestFunction};

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{DiscreteField, Discretization, PenalizedProblem};
use crate::domain::{measures, DomainSpec, VolumeRule};
use crate::error::{Error, Result};
use crate::geometry::{ricci_min_eigenvalue, MetricField, MetricSpec};
use crate::solver::{
    check_hypotheses, geometric_schedule, interior_bump, run_continuation, shift_solution, validate_schedule,
    ContinuationReport, NewtonSettings, PhiSpec, U0Spec, RICCI_TOL,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Trivial,
    LambdaUniqueness,
    UUniqueness,
    ContactAngle,
    Compatibility,
    GradientUniformity,
    BarrierBracket,
    ShiftIdentity,
    Hypotheses,
    ExpectedLambda,
}

impl CheckKind {
    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Trivial => "trivial",
            CheckKind::LambdaUniqueness => "lambda-uniqueness",
            CheckKind::UUniqueness => "u-uniqueness",
            CheckKind::ContactAngle => "contact-angle",
            CheckKind::Compatibility => "compatibility",
            CheckKind::GradientUniformity => "gradient-uniformity",
            CheckKind::BarrierBracket => "barrier-bracket",
            CheckKind::ShiftIdentity => "shift-identity",
            CheckKind::Hypotheses => "hypotheses",
            CheckKind::ExpectedLambda => "expected-lambda",
        }
    }

    /// Every check that applies to a solvable case with unknown λ.
    pub const STANDARD: [CheckKind; 8] = [
        CheckKind::LambdaUniqueness,
        CheckKind::UUniqueness,
        CheckKind::ContactAngle,
        CheckKind::Compatibility,
        CheckKind::GradientUniformity,
        CheckKind::BarrierBracket,
        CheckKind::ShiftIdentity,
        CheckKind::Hypotheses,
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub lambda_uniqueness: f64,
    /// Relative to `1 + max|u|`.
    pub u_uniqueness: f64,
    pub shift_residual: f64,
    pub shift_field: f64,
    pub contact_identity: f64,
    pub compatibility_floor: f64,
    /// Allowed relative variation of `sup|Du|_σ` across the schedule.
    pub gradient_variation: f64,
    pub trivial: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            lambda_uniqueness: 1e-8,
            u_uniqueness: 1e-7,
            shift_residual: 1e-10,
            shift_field: 1e-12,
            contact_identity: 1e-12,
            compatibility_floor: 1e-6,
            gradient_variation: 0.05,
            trivial: 1e-10,
        }
    }
}

impl Tolerances {
    fn validate(&self) -> Result<()> {
        let all = [
            self.lambda_uniqueness,
            self.u_uniqueness,
            self.shift_residual,
            self.shift_field,
            self.contact_identity,
            self.compatibility_floor,
            self.gradient_variation,
            self.trivial,
        ];
        if all.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::InvalidArgument { name: "tolerances", reason: "must all be positive".into() });
        }
        Ok(())
    }
}

/// Reference value with its tolerance and where it comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedValue {
    pub value: f64,
    pub tolerance: f64,
    #[serde(default)]
    pub note: String,
}

fn default_schedule() -> Vec<f64> {
    geometric_schedule(1e-1, 1e-4, 4)
}

fn default_perturbation() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationCase {
    pub name: String,
    pub metric: MetricSpec,
    pub domain: DomainSpec,
    pub phi: PhiSpec,
    #[serde(default)]
    pub u0: U0Spec,
    #[serde(default = "default_schedule")]
    pub eps_schedule: Vec<f64>,
    #[serde(default)]
    pub expected_lambda: Option<ExpectedValue>,
    #[serde(default)]
    pub expected_contact_cosine: Option<ExpectedValue>,
    /// The case is a negative control: the hypothesis check must flag it.
    #[serde(default)]
    pub expect_hypothesis_violation: bool,
    /// Perturbation height for the uniqueness runs, in units of the domain diameter.
    #[serde(default = "default_perturbation")]
    pub perturbation: f64,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub checks: Vec<CheckKind>,
    #[serde(default)]
    pub newton: NewtonSettings<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl VerificationCase {
    /// Case with default schedule, tolerances and the standard checks.
    pub fn new(name: &str, metric: MetricSpec, domain: DomainSpec, phi: PhiSpec) -> Self {
        VerificationCase {
            name: name.into(),
            metric,
            domain,
            phi,
            u0: U0Spec::default(),
            eps_schedule: default_schedule(),
            expected_lambda: None,
            expected_contact_cosine: None,
            expect_hypothesis_violation: false,
            perturbation: default_perturbation(),
            tolerances: Tolerances::default(),
            checks: CheckKind::STANDARD.to_vec(),
            newton: NewtonSettings::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::InvalidArgument { name: "name", reason: "must be nonempty".into() });
        }
        validate_schedule(&self.eps_schedule)?;
        self.tolerances.validate()?;
        self.newton.validate()?;
        for e in self.expected_lambda.iter().chain(&self.expected_contact_cosine) {
            if !(e.tolerance > 0.0) {
                return Err(Error::InvalidArgument { name: "expected.tolerance", reason: "must be positive".into() });
            }
        }
        if self.checks.contains(&CheckKind::ExpectedLambda) && self.expected_lambda.is_none() {
            return Err(Error::InvalidArgument {
                name: "expected_lambda",
                reason: "required by the expected-lambda check".into(),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub check: String,
    pub passed: bool,
    pub measured: BTreeMap<String, f64>,
    pub detail: String,
}

impl CheckOutcome {
    fn new(check: &str, passed: bool, measured: &[(&str, f64)], detail: impl Into<String>) -> Self {
        CheckOutcome {
            check: check.into(),
            passed,
            measured: measured.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationOutcome {
    pub case: String,
    pub passed: bool,
    pub checks: Vec<CheckOutcome>,
    pub warnings: Vec<String>,
    pub error: Option<String>,
}

impl VerificationOutcome {
    fn from_checks(case: &str, checks: Vec<CheckOutcome>, warnings: Vec<String>) -> Self {
        VerificationOutcome {
            case: case.into(),
            passed: checks.iter().all(|c| c.passed),
            checks,
            warnings,
            error: None,
        }
    }

    fn failed(case: &str, error: impl std::fmt::Display) -> Self {
        VerificationOutcome {
            case: case.into(),
            passed: false,
            checks: Vec::new(),
            warnings: Vec::new(),
            error: Some(error.to_string()),
        }
    }

    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.check == name)
    }
}

struct Prepared {
    problem: PenalizedProblem<f64>,
    u0: Vec<f64>,
}

fn prepare(case: &VerificationCase) -> Result<Prepared> {
    case.validate()?;
    let metric: Arc<dyn MetricField<f64>> = case.metric.build()?;
    let domain = Arc::new(case.domain.build::<f64>()?);
    let phi = case.phi.sample(&domain)?;
    let u0 = case.u0.build(&domain, &*metric, &phi)?;
    let disc = Arc::new(Discretization::new(metric, domain)?);
    let problem = PenalizedProblem::new(disc, phi, case.eps_schedule[0], 0.0)?;
    Ok(Prepared { problem, u0 })
}

fn continuation(case: &VerificationCase, prep: &Prepared, u0: &[f64]) -> Result<ContinuationReport<f64>> {
    let u0 = DiscreteField::new(u0.to_vec(), prep.problem.num_vertices())?;
    run_continuation(&prep.problem, &case.eps_schedule, &u0, &case.newton).map_err(|a| a.source)
}

fn spread(v: impl IntoIterator<Item = f64>) -> f64 {
    let (lo, hi) = v.into_iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    hi - lo
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn final_fields(r: &ContinuationReport<f64>) -> (&[f64], &[f64], f64) {
    let u = r.u_final.as_ref().expect("complete report");
    let u_eps0 = r.u_eps0_final.as_ref().expect("complete report");
    (u, u_eps0, r.records.last().expect("nonempty schedule").eps)
}

/// Runs the selected checks of one case.
pub fn run_case(case: &VerificationCase) -> VerificationOutcome {
    match run_case_inner(case) {
        Ok(o) => o,
        Err(e) => VerificationOutcome::failed(&case.name, e),
    }
}

fn run_case_inner(case: &VerificationCase) -> Result<VerificationOutcome> {
    let prep = prepare(case)?;
    let tol = &case.tolerances;
    let p = &prep.problem;
    let mut out = Vec::new();
    let mut warnings = Vec::new();

    let needs_solve = case.checks.iter().any(|c| *c != CheckKind::Hypotheses);
    let base = if needs_solve { Some(continuation(case, &prep, &prep.u0)?) } else { None };
    if let Some(b) = &base {
        warnings.extend(b.warnings.iter().cloned());
    }
    let needs_second = case.checks.iter().any(|c| matches!(c, CheckKind::LambdaUniqueness | CheckKind::UUniqueness));
    let perturbed = if needs_second {
        let dom = p.domain();
        let bump = interior_bump(dom, case.perturbation * dom.diameter(), case.seed);
        let init: Vec<f64> = prep.u0.iter().zip(&bump).map(|(a, b)| a + b).collect();
        Some(continuation(case, &prep, &init)?)
    } else {
        None
    };

    for &check in &case.checks {
        let name = check.name();
        let outcome = match check {
            CheckKind::Trivial => {
                let b = base.as_ref().unwrap();
                let (u, _, _) = final_fields(b);
                let lambda = b.lambda_final.unwrap();
                let s = spread(u.iter().copied());
                CheckOutcome::new(
                    name,
                    lambda.abs() <= tol.trivial && s <= tol.trivial,
                    &[("lambda", lambda), ("u_spread", s), ("tolerance", tol.trivial)],
                    "phi = 0 must give lambda = 0 and constant u",
                )
            }
            CheckKind::LambdaUniqueness => {
                let (l1, l2) =
                    (base.as_ref().unwrap().lambda_final.unwrap(), perturbed.as_ref().unwrap().lambda_final.unwrap());
                let d = (l1 - l2).abs();
                CheckOutcome::new(
                    name,
                    d <= tol.lambda_uniqueness,
                    &[("lambda_1", l1), ("lambda_2", l2), ("difference", d), ("tolerance", tol.lambda_uniqueness)],
                    "continuations from u0 and from u0 + interior bump",
                )
            }
            CheckKind::UUniqueness => {
                let b = base.as_ref().unwrap();
                let (u1, _, _) = final_fields(b);
                let (u2, _, _) = final_fields(perturbed.as_ref().unwrap());
                let bound = tol.u_uniqueness * (1.0 + max_abs(u1));
                let s = spread(u1.iter().zip(u2).map(|(a, b)| a - b));
                // Anchoring at a shifted reference value moves the limit by exactly that shift.
                let offset = 1.0;
                let shifted_u0: Vec<f64> = prep.u0.iter().map(|v| v + offset).collect();
                let r3 = continuation(case, &prep, &shifted_u0)?;
                let (u3, _, _) = final_fields(&r3);
                let offset_err = u1.iter().zip(u3).fold(0.0f64, |m, (a, b)| m.max((b - a - offset).abs()));
                CheckOutcome::new(
                    name,
                    s <= bound && offset_err <= bound,
                    &[("difference_spread", s), ("anchor_offset_error", offset_err), ("bound", bound)],
                    "difference of normalized limits is constant",
                )
            }
            CheckKind::ContactAngle => {
                let b = base.as_ref().unwrap();
                let (_, u_eps0, _) = final_fields(b);
                let dom = p.domain();
                let lengths = measures(dom, &**p.discretization().metric(), VolumeRule::Centroid)?.boundary_edge;
                let bnd = dom.boundary();
                let n = bnd.len();
                let mut identity_err = 0.0f64;
                let mut range_ok = true;
                let mut expected_err = 0.0f64;
                for k in 0..n {
                    let (prev, next) = ((k + n - 1) % n, (k + 1) % n);
                    let t = (u_eps0[bnd[next]] - u_eps0[bnd[prev]]) / (lengths[prev] + lengths[k]);
                    let phi = p.phi()[k];
                    let c = b.contact_cosine[k];
                    identity_err = identity_err.max((c - phi / (1.0 + t * t + phi * phi).sqrt()).abs());
                    range_ok &= c > -1.0 && c < 1.0;
                    if let Some(e) = &case.expected_contact_cosine {
                        expected_err = expected_err.max((c - e.value).abs());
                    }
                }
                let mut measured = vec![("identity_error", identity_err), ("identity_tolerance", tol.contact_identity)];
                let mut passed = identity_err <= tol.contact_identity && range_ok;
                if let Some(e) = &case.expected_contact_cosine {
                    measured.push(("expected", e.value));
                    measured.push(("expected_error", expected_err));
                    measured.push(("expected_tolerance", e.tolerance));
                    passed &= expected_err <= e.tolerance;
                }
                CheckOutcome::new(name, passed, &measured, "cosine = phi/W_b and strictly inside (-1, 1)")
            }
            CheckKind::Compatibility => {
                let b = base.as_ref().unwrap();
                let (l, lc) = (b.lambda_final.unwrap(), b.lambda_compat_final.unwrap());
                let disc_err = case.expected_lambda.as_ref().map_or(0.0, |e| (l - e.value).abs());
                let bound = tol.compatibility_floor.max(2.0 * disc_err);
                CheckOutcome::new(
                    name,
                    (l - lc).abs() <= bound,
                    &[("lambda_final", l), ("lambda_compat", lc), ("difference", (l - lc).abs()), ("bound", bound)],
                    "lambda versus the boundary flux integral",
                )
            }
            CheckKind::GradientUniformity => {
                let b = base.as_ref().unwrap();
                let g: Vec<f64> = b.records.iter().map(|r| r.sup_grad).collect();
                let (lo, hi) = (g.iter().copied().fold(f64::INFINITY, f64::min), g.iter().copied().fold(0.0, f64::max));
                let variation = if hi == 0.0 { 0.0 } else { hi / lo - 1.0 };
                CheckOutcome::new(
                    name,
                    variation < tol.gradient_variation,
                    &[("sup_grad_min", lo), ("sup_grad_max", hi), ("variation", variation)],
                    "sup |Du| uniform across the schedule",
                )
            }
            CheckKind::BarrierBracket => {
                let b = base.as_ref().unwrap();
                let worst = b.records.iter().fold(0.0f64, |m, r| m.max(r.upsilon.abs()));
                CheckOutcome::new(
                    name,
                    worst < b.barrier,
                    &[("max_abs_upsilon", worst), ("barrier", b.barrier)],
                    "upsilon_eps in (-M, M)",
                )
            }
            CheckKind::ShiftIdentity => shift_identity(p, base.as_ref().unwrap(), tol)?,
            CheckKind::Hypotheses => {
                let h = match &base {
                    Some(b) => b.hypotheses.clone(),
                    None => check_hypotheses(p)?,
                };
                let violated = !(h.ricci_nonnegative && h.strictly_convex);
                if base.is_none() && violated {
                    warnings.push("hypothesis violated".into());
                }
                CheckOutcome::new(
                    name,
                    violated == case.expect_hypothesis_violation,
                    &[
                        ("ricci_min", h.ricci_min),
                        ("kappa1", h.kappa1),
                        ("violation_flagged", violated as u8 as f64),
                        ("violation_expected", case.expect_hypothesis_violation as u8 as f64),
                    ],
                    "Ric >= 0 on the samples and strictly convex boundary",
                )
            }
            CheckKind::ExpectedLambda => {
                let e = case.expected_lambda.as_ref().unwrap();
                let l = base.as_ref().unwrap().lambda_final.unwrap();
                CheckOutcome::new(
                    name,
                    (l - e.value).abs() <= e.tolerance,
                    &[("lambda", l), ("expected", e.value), ("error", (l - e.value).abs()), ("tolerance", e.tolerance)],
                    e.note.clone(),
                )
            }
        };
        out.push(outcome);
    }
    Ok(VerificationOutcome::from_checks(&case.name, out, warnings))
}

/// Upsilon values used by the shift-identity check.
pub const SHIFT_UPSILONS: [f64; 3] = [-1.0, 0.3, 2.0];

fn shift_identity(p: &PenalizedProblem<f64>, b: &ContinuationReport<f64>, tol: &Tolerances) -> Result<CheckOutcome> {
    let (_, u_eps0, eps) = final_fields(b);
    let base = p.with_eps(eps)?.with_upsilon(0.0);
    let base_field = base.lambda_field(u_eps0);
    let mut residual = 0.0f64;
    let mut field_err = 0.0f64;
    let mut shifted = Vec::new();
    for &ups in &SHIFT_UPSILONS {
        let q = base.with_upsilon(ups);
        let u = shift_solution(&DiscreteField::new(u_eps0.to_vec(), u_eps0.len())?, eps, ups)?;
        residual = residual.max(crate::sparse::norm_inf(&q.residual(&u)?));
        let f = q.lambda_field(&u);
        field_err = field_err.max(f.iter().zip(&base_field).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())));
        shifted.push(u);
    }
    let monotone = shifted.windows(2).all(|w| w[0].iter().zip(w[1].iter()).all(|(a, b)| a > b));
    Ok(CheckOutcome::new(
        "shift-identity",
        residual <= tol.shift_residual && field_err <= tol.shift_field && monotone,
        &[
            ("eps", eps),
            ("max_residual", residual),
            ("residual_tolerance", tol.shift_residual),
            ("field_difference", field_err),
            ("field_tolerance", tol.shift_field),
            ("monotone", monotone as u8 as f64),
        ],
        "u_{eps,0} - upsilon/eps solves the upsilon problem",
    ))
}

pub fn check_lambda_uniqueness(case: &VerificationCase) -> VerificationOutcome {
    run_case(&VerificationCase { checks: vec![CheckKind::LambdaUniqueness], ..case.clone() })
}

pub fn check_u_uniqueness_up_to_constant(case: &VerificationCase) -> VerificationOutcome {
    run_case(&VerificationCase { checks: vec![CheckKind::UUniqueness], ..case.clone() })
}

pub fn check_contact_angle(case: &VerificationCase) -> VerificationOutcome {
    run_case(&VerificationCase { checks: vec![CheckKind::ContactAngle], ..case.clone() })
}

/// Cap over the Euclidean disk: `u = −√(ρ² − r²)`, `φ = −R/√(ρ² − R²)`, `λ = 2/ρ`.
pub fn regression_spherical_cap(radius: f64, rho: f64, h: f64, newton: &NewtonSettings<f64>) -> VerificationOutcome {
    let name = format!("spherical-cap(R={radius}, rho={rho}, h={h})");
    match spherical_cap_inner(radius, rho, h, newton) {
        Ok(checks) => VerificationOutcome::from_checks(&name, checks, Vec::new()),
        Err(e) => VerificationOutcome::failed(&name, e),
    }
}

/// Solution of the cap problem at one mesh level.
pub struct CapRun {
    pub lambda: f64,
    pub lambda_error: f64,
    /// Spread of `u^∞ − u_cap` over the vertices.
    pub shape_error: f64,
    pub max_contact_error: f64,
    pub num_vertices: usize,
}

pub fn solve_spherical_cap(radius: f64, rho: f64, h: f64, eps: &[f64], newton: &NewtonSettings<f64>) -> Result<CapRun> {
    if !(radius > 0.0 && rho > radius) {
        return Err(Error::InvalidArgument { name: "rho", reason: "need 0 < R < rho".into() });
    }
    let case = VerificationCase {
        eps_schedule: eps.to_vec(),
        newton: newton.clone(),
        ..VerificationCase::new(
            "cap",
            MetricSpec::Euclidean { dim: 2 },
            DomainSpec::Disk { radius, center: [0.0, 0.0], h },
            PhiSpec::Constant { value: -radius / (rho * rho - radius * radius).sqrt() },
        )
    };
    let prep = prepare(&case)?;
    let report = continuation(&case, &prep, &prep.u0)?;
    let (u, _, _) = final_fields(&report);
    let dom = prep.problem.domain();
    let cap = |p: [f64; 2]| -(rho * rho - p[0] * p[0] - p[1] * p[1]).sqrt();
    let shape_error = spread(u.iter().zip(dom.vertices()).map(|(&a, &x)| a - cap(x)));
    let lambda = report.lambda_final.unwrap();
    let cosine = -radius / rho;
    Ok(CapRun {
        lambda,
        lambda_error: (lambda - 2.0 / rho).abs(),
        shape_error,
        max_contact_error: report.contact_cosine.iter().fold(0.0, |m, c| m.max((c - cosine).abs())),
        num_vertices: dom.num_vertices(),
    })
}

/// Convergence-order threshold for the two-level estimate.
pub const CAP_MIN_RATIO: f64 = 1.7;

fn spherical_cap_inner(radius: f64, rho: f64, h: f64, newton: &NewtonSettings<f64>) -> Result<Vec<CheckOutcome>> {
    let eps = default_schedule();
    let coarse = solve_spherical_cap(radius, rho, h, &eps, newton)?;
    let fine = solve_spherical_cap(radius, rho, h / 2.0, &eps, newton)?;
    let lambda_tol = 1e-3f64.max(0.1 * h);
    let ratio = coarse.lambda_error / fine.lambda_error;
    Ok(vec![
        CheckOutcome::new(
            "cap-lambda",
            coarse.lambda_error <= lambda_tol,
            &[
                ("lambda", coarse.lambda),
                ("exact", 2.0 / rho),
                ("error", coarse.lambda_error),
                ("tolerance", lambda_tol),
            ],
            "lambda = n/rho",
        ),
        CheckOutcome::new(
            "cap-convergence",
            ratio >= CAP_MIN_RATIO,
            &[("error_h", coarse.lambda_error), ("error_h_half", fine.lambda_error), ("ratio", ratio)],
            "two-level error ratio",
        ),
        CheckOutcome::new(
            "cap-shape",
            coarse.shape_error <= h && fine.shape_error < coarse.shape_error,
            &[("spread_h", coarse.shape_error), ("spread_h_half", fine.shape_error)],
            "u - u_cap constant up to discretization error",
        ),
        CheckOutcome::new(
            "cap-contact",
            coarse.max_contact_error <= 1e-3,
            &[("max_error", coarse.max_contact_error), ("expected", -radius / rho)],
            "contact cosine = -R/rho",
        ),
    ])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RicciExpectation {
    Nonnegative,
    Negative,
}

/// Sign of Ric on a sample grid and the commutation rule for third derivatives.
pub fn check_ricci_hypothesis_and_identity(
    metric: &MetricSpec,
    expect: RicciExpectation,
    sample_radius: f64,
) -> VerificationOutcome {
    let name = format!("ricci({})", metric.name());
    let inner = || -> Result<Vec<CheckOutcome>> {
        let m: Arc<dyn MetricField<f64>> = metric.build()?;
        if m.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: m.dim() });
        }
        let samples = sample_grid(sample_radius, 5);
        let rmin = ricci_min_eigenvalue(&*m, &samples)?;
        let sign_ok = match expect {
            RicciExpectation::Nonnegative => rmin >= -RICCI_TOL,
            RicciExpectation::Negative => rmin < -RICCI_TOL,
        };
        let f = QuarticTestFunction;
        let (e1, c1) = ricci_identity_error(&*m, &f, &samples, 1e-3)?;
        let (e2, _) = ricci_identity_error(&*m, &f, &samples, 5e-4)?;
        // A flat metric has a vanishing commutator; otherwise the error must
        // be small and shrink quadratically.
        let flat = matches!(metric, MetricSpec::Euclidean { .. } | MetricSpec::Constant { .. });
        let mut measured = vec![("relative_error_h", e1), ("relative_error_h_half", e2), ("commutator_max", c1)];
        let identity_ok = if flat {
            c1 <= 1e-9
        } else {
            let ratio = e1 / e2;
            measured.push(("ratio", ratio));
            e1 <= 1e-4 && (ratio >= 3.0 || e1 <= 1e-11)
        };
        Ok(vec![
            CheckOutcome::new(
                "ricci-sign",
                sign_ok,
                &[("ricci_min", rmin), ("violation_flagged", (rmin < -RICCI_TOL) as u8 as f64)],
                format!("expected {expect:?}"),
            ),
            CheckOutcome::new("ricci-identity", identity_ok, &measured, "u_kij - u_ijk = R^l_ikj u_l"),
        ])
    };
    match inner() {
        Ok(checks) => VerificationOutcome::from_checks(&name, checks, Vec::new()),
        Err(e) => VerificationOutcome::failed(&name, e),
    }
}

/// One entry of a suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SuiteItem {
    Case(Box<VerificationCase>),
    SphericalCap { radius: f64, rho: f64, h: f64 },
    Ricci { metric: MetricSpec, expect: RicciExpectation, sample_radius: f64 },
}

impl SuiteItem {
    pub fn run(&self) -> VerificationOutcome {
        match self {
            SuiteItem::Case(c) => run_case(c),
            SuiteItem::SphericalCap { radius, rho, h } => {
                regression_spherical_cap(*radius, *rho, *h, &NewtonSettings::default())
            }
            SuiteItem::Ricci { metric, expect, sample_radius } => {
                check_ricci_hypothesis_and_identity(metric, *expect, *sample_radius)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteOutcome {
    pub suite: String,
    pub passed: bool,
    pub outcomes: Vec<VerificationOutcome>,
    /// Suites not run because a prerequisite failed.
    pub skipped: Vec<String>,
}

/// Runs the items in parallel; the outcome order follows the item order.
pub fn run_items(suite: &str, items: &[SuiteItem]) -> SuiteOutcome {
    let outcomes: Vec<VerificationOutcome> = items.par_iter().map(SuiteItem::run).collect();
    SuiteOutcome { suite: suite.into(), passed: outcomes.iter().all(|o| o.passed), outcomes, skipped: Vec::new() }
}

pub const SUITES: [&str; 4] = ["flat", "curved", "negative-controls", "all"];

const SUITE_H: f64 = 0.05;

fn case(name: &str, metric: MetricSpec, domain: DomainSpec, phi: PhiSpec) -> VerificationCase {
    VerificationCase::new(name, metric, domain, phi)
}

fn with_checks(mut c: VerificationCase, extra: &[CheckKind]) -> VerificationCase {
    c.checks.extend_from_slice(extra);
    c
}

/// Items of a built-in suite (`all` is the concatenation, run in order).
pub fn builtin_suite(name: &str) -> Result<Vec<SuiteItem>> {
    let euclid = MetricSpec::Euclidean { dim: 2 };
    let sphere = MetricSpec::Sphere { radius: 1.0, chart: None };
    let unit_disk = DomainSpec::Disk { radius: 1.0, center: [0.0, 0.0], h: SUITE_H };
    let chart_disk = DomainSpec::Disk { radius: 0.5, center: [0.0, 0.0], h: SUITE_H / 2.0 };
    let boxed = |c: VerificationCase| SuiteItem::Case(Box::new(c));
    let cap_phi = -1.0 / 3f64.sqrt();
    Ok(match name {
        "flat" => vec![
            boxed(with_checks(
                case("flat-zero", euclid.clone(), unit_disk.clone(), PhiSpec::Constant { value: 0.0 }),
                &[CheckKind::Trivial],
            )),
            boxed(VerificationCase {
                expected_lambda: Some(ExpectedValue {
                    value: 1.0,
                    tolerance: 1e-2,
                    note: "cap of radius 2: lambda = n/rho".into(),
                }),
                expected_contact_cosine: Some(ExpectedValue {
                    value: -0.5,
                    tolerance: 1e-3,
                    note: "cap of radius 2".into(),
                }),
                ..with_checks(
                    case("flat-cap", euclid.clone(), unit_disk.clone(), PhiSpec::Constant { value: cap_phi }),
                    &[CheckKind::ExpectedLambda],
                )
            }),
            boxed(case(
                "flat-ellipse",
                euclid.clone(),
                DomainSpec::Ellipse { a: 1.25, b: 0.8, h: SUITE_H },
                PhiSpec::Cosine { mean: -0.3, amplitude: 0.15, mode: 2 },
            )),
            SuiteItem::SphericalCap { radius: 1.0, rho: 2.0, h: SUITE_H },
            SuiteItem::Ricci { metric: euclid, expect: RicciExpectation::Nonnegative, sample_radius: 0.5 },
        ],
        "curved" => {
            let rho_c: f64 = 0.5;
            let phi: f64 = -0.4;
            let sphere_lambda = -phi / ((1.0 + phi * phi).sqrt() * rho_c);
            let perturbed = MetricSpec::PerturbedFlat { amplitude: 0.05 };
            vec![
                boxed(with_checks(
                    case("sphere-zero", sphere.clone(), chart_disk.clone(), PhiSpec::Constant { value: 0.0 }),
                    &[CheckKind::Trivial],
                )),
                boxed(VerificationCase {
                    expected_lambda: Some(ExpectedValue {
                        value: sphere_lambda,
                        tolerance: 1e-2,
                        note: "geodesic disk on the unit sphere, constant phi".into(),
                    }),
                    ..with_checks(
                        case("sphere-cap", sphere.clone(), chart_disk.clone(), PhiSpec::Constant { value: phi }),
                        &[CheckKind::ExpectedLambda],
                    )
                }),
                boxed(case(
                    "perturbed-flat",
                    perturbed.clone(),
                    DomainSpec::Disk { radius: 0.6, center: [0.1, 0.0], h: SUITE_H },
                    PhiSpec::Cosine { mean: -0.5, amplitude: 0.1, mode: 1 },
                )),
                SuiteItem::Ricci { metric: sphere, expect: RicciExpectation::Nonnegative, sample_radius: 0.5 },
                SuiteItem::Ricci { metric: perturbed, expect: RicciExpectation::Nonnegative, sample_radius: 0.5 },
            ]
        }
        "negative-controls" => {
            let control = |name: &str, metric: MetricSpec, domain: DomainSpec, phi: f64| {
                boxed(VerificationCase {
                    expect_hypothesis_violation: true,
                    checks: vec![CheckKind::Hypotheses],
                    ..case(name, metric, domain, PhiSpec::Constant { value: phi })
                })
            };
            vec![
                control("hyperbolic-cap", MetricSpec::Hyperbolic { radius: 1.0, chart: None }, chart_disk, -0.4),
                control(
                    "star-domain",
                    euclid,
                    DomainSpec::Star { radius: 1.0, amplitude: 0.2, lobes: 5, h: SUITE_H },
                    -0.3,
                ),
                SuiteItem::Ricci {
                    metric: MetricSpec::Hyperbolic { radius: 1.0, chart: None },
                    expect: RicciExpectation::Negative,
                    sample_radius: 0.5,
                },
            ]
        }
        "all" => {
            let mut v = builtin_suite("flat")?;
            v.extend(builtin_suite("curved")?);
            v.extend(builtin_suite("negative-controls")?);
            v
        }
        other => {
            return Err(Error::InvalidArgument {
                name: "suite",
                reason: format!("unknown suite {other:?} (expected one of {})", SUITES.join(", ")),
            })
        }
    })
}

fn seeded(mut items: Vec<SuiteItem>, seed: Option<u64>) -> Vec<SuiteItem> {
    if let Some(s) = seed {
        for item in &mut items {
            if let SuiteItem::Case(c) = item {
                c.seed = s;
            }
        }
    }
    items
}

/// Runs a built-in suite, optionally overriding the seed of every case. In
/// `all`, curved checks run only if every flat check passed.
pub fn run_suite(name: &str, seed: Option<u64>) -> Result<SuiteOutcome> {
    let items = |n: &str| builtin_suite(n).map(|v| seeded(v, seed));
    if name != "all" {
        return Ok(run_items(name, &items(name)?));
    }
    let flat = run_items("flat", &items("flat")?);
    let mut outcomes = flat.outcomes;
    let mut skipped = Vec::new();
    if flat.passed {
        outcomes.extend(run_items("curved", &items("curved")?).outcomes);
    } else {
        skipped.push("curved".to_string());
    }
    outcomes.extend(run_items("negative-controls", &items("negative-controls")?).outcomes);
    let passed = skipped.is_empty() && outcomes.iter().all(|o| o.passed);
    Ok(SuiteOutcome { suite: "all".into(), passed, outcomes, skipped })
}

/// Fixed-width table of a suite outcome.
pub fn render_table(s: &SuiteOutcome) -> String {
    use std::fmt::Write as _;
    let mut t = String::new();
    writeln!(t, "{:<40} {:<22} {:<6} key values", "case", "check", "result").unwrap();
    for o in &s.outcomes {
        if let Some(e) = &o.error {
            writeln!(t, "{:<40} {:<22} {:<6} {}", o.case, "-", "ERROR", e).unwrap();
        }
        for c in &o.checks {
            let values: Vec<String> = c.measured.iter().map(|(k, v)| format!("{k}={v:.3e}")).collect();
            let result = if c.passed { "pass" } else { "FAIL" };
            writeln!(t, "{:<40} {:<22} {:<6} {}", o.case, c.check, result, values.join(" ")).unwrap();
        }
        for w in &o.warnings {
            writeln!(t, "{:<40} {:<22} {:<6} {}", o.case, "warning", "-", w).unwrap();
        }
    }
    for sk in &s.skipped {
        writeln!(t, "suite {sk} skipped: flat suite failed").unwrap();
    }
    writeln!(t, "suite {}: {}", s.suite, if s.passed { "PASSED" } else { "FAILED" }).unwrap();
    t
}
