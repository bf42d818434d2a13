use std::sync::Arc;

use cmcgraph::assembly::{DiscreteField, Discretization, PenalizedProblem};
use cmcgraph::domain::DomainSpec;
use cmcgraph::geometry::MetricSpec;
use cmcgraph::solver::{
    compatible_u0, geometric_schedule, run_continuation, select_upsilon, shift_solution, solve_penalized,
    NewtonSettings, PhiSpec,
};
use cmcgraph::sparse::norm_inf;
use cmcgraph::{Error, Real};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cap_problem<T: Real>(h: f64, eps: f64) -> PenalizedProblem<T> {
    let dom = Arc::new(DomainSpec::Disk { radius: 1.0, center: [0.0, 0.0], h }.build::<T>().unwrap());
    let phi = PhiSpec::Constant { value: -1.0 / 3f64.sqrt() }.sample(&dom).unwrap();
    let disc = Arc::new(Discretization::new(MetricSpec::Euclidean { dim: 2 }.build().unwrap(), dom).unwrap());
    PenalizedProblem::new(disc, phi, T::lit(eps), T::zero()).unwrap()
}

#[test]
fn random_initial_guesses_reach_the_same_solution() {
    let p = cap_problem::<f64>(0.05, 1e-3);
    let s = NewtonSettings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let reference = solve_penalized(&p, &DiscreteField::constant(0.0, p.num_vertices()), &s).unwrap();
    assert!(reference.converged);
    for _ in 0..3 {
        let init: Vec<f64> = (0..p.num_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = solve_penalized(&p, &DiscreteField::new(init, p.num_vertices()).unwrap(), &s).unwrap();
        assert!(r.converged, "{} {:?}", r.iterations, r.residual_history);
        let diff: Vec<f64> = r.u.iter().zip(reference.u.iter()).map(|(a, b)| a - b).collect();
        assert!(norm_inf(&diff) <= 1e-8);
    }
}

#[test]
fn upsilon_selection_example() {
    let u = DiscreteField::new(vec![0.0, 3.0, 1.0], 3).unwrap();
    let ups = select_upsilon(&u, 0.1, 1.0, 1).unwrap();
    assert!((ups - 0.2f64).abs() < 1e-15);
    let shifted = shift_solution(&u, 0.1, ups).unwrap();
    assert!((shifted[1] - 1.0).abs() < 1e-14);
    assert!(select_upsilon(&u, 0.0, 1.0, 1).is_err());
    assert!(select_upsilon(&u, 0.1, 1.0, 9).is_err());
}

#[test]
fn continuation_recovers_cap_curvature() {
    let p = cap_problem::<f64>(0.05, 0.1);
    let u0 = compatible_u0(p.domain(), &**p.discretization().metric(), p.phi()).unwrap();
    let u0 = DiscreteField::new(u0, p.num_vertices()).unwrap();
    let report = run_continuation(&p, &geometric_schedule(1e-1, 1e-4, 4), &u0, &NewtonSettings::default()).unwrap();
    assert!(report.complete);
    assert!((report.lambda_final.unwrap() - 1.0).abs() < 1e-3);
    let spreads: Vec<f64> = report.records.iter().map(|r| r.lambda_spread).collect();
    assert!(spreads.windows(2).all(|w| w[1] < w[0]));
    let u = report.u_final.as_ref().unwrap();
    assert!((u[report.anchor_vertex] - report.u0_anchor).abs() < 1e-9);
    assert!(report.warnings.is_empty());
}

#[test]
fn divergence_reports_partial_progress() {
    let p = cap_problem::<f64>(0.1, 0.1);
    let u0 = DiscreteField::constant(0.0, p.num_vertices());
    let s = NewtonSettings { max_iter: 1, ..NewtonSettings::default() };
    let err = run_continuation(&p, &[1e-1, 1e-2], &u0, &s).unwrap_err();
    assert!(matches!(err.source, Error::NewtonDiverged { .. }));
    assert!(err.partial.is_some());
}

#[test]
fn invalid_schedules_are_rejected() {
    let p = cap_problem::<f64>(0.2, 0.1);
    let u0 = DiscreteField::constant(0.0, p.num_vertices());
    let s = NewtonSettings::default();
    for bad in [vec![], vec![0.1, 0.2], vec![0.1, -1.0], vec![f64::NAN]] {
        assert!(matches!(run_continuation(&p, &bad, &u0, &s).unwrap_err().source, Error::InvalidArgument { .. }));
    }
}

#[test]
fn single_precision_continuation() {
    let p = cap_problem::<f32>(0.1, 0.1);
    let u0 = compatible_u0(p.domain(), &**p.discretization().metric(), p.phi()).unwrap();
    let u0 = DiscreteField::new(u0, p.num_vertices()).unwrap();
    let report = run_continuation(&p, &[1e-1f32, 1e-2], &u0, &NewtonSettings::default()).unwrap();
    assert!(report.complete);
    assert!((report.lambda_final.unwrap() - 1.0).abs() < 2e-2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn shifted_solutions_solve_and_order(eps in 0.01..1.0f64, a in -3.0..3.0f64, b in -3.0..3.0f64) {
        prop_assume!((a - b).abs() > 1e-3);
        let p = cap_problem::<f64>(0.15, eps);
        let sol = solve_penalized(&p, &DiscreteField::constant(0.0, p.num_vertices()), &NewtonSettings::default()).unwrap();
        let ua = shift_solution(&sol.u, eps, a).unwrap();
        let ub = shift_solution(&sol.u, eps, b).unwrap();
        prop_assert!(norm_inf(&p.with_upsilon(a).residual(&ua).unwrap()) <= 1e-10);
        prop_assert!(norm_inf(&p.with_upsilon(b).residual(&ub).unwrap()) <= 1e-10);
        let (lo, hi) = if a < b { (&ua, &ub) } else { (&ub, &ua) };
        prop_assert!(lo.iter().zip(hi.iter()).all(|(x, y)| x > y));
    }
}
