use cmcgraph::geometry::{
    build_jet, flux_with_inverse, mean_curvature, ConformalMetric, FiniteDifferenceMetric, MetricField,
    PolarChartMetric, PolarProfile,
};
use cmcgraph::linalg::Matrix;
use cmcgraph::verify::{ricci_identity_error, QuarticTestFunction};
use proptest::prelude::*;

fn spd(a: f64, b: f64, c: f64) -> Matrix<f64> {
    // L Lᵀ + 0.1 I with L lower triangular.
    let l = Matrix::from_row_slice(2, &[a.abs() + 0.2, 0.0, b, c.abs() + 0.2]);
    let mut s = l.mul(&l.transpose());
    s[(0, 0)] += 0.1;
    s[(1, 1)] += 0.1;
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn flux_is_monotone_and_bounded(a in -2.0..2.0f64, b in -2.0..2.0f64, c in -2.0..2.0f64,
                                    p in -50.0..50.0f64, q in -50.0..50.0f64) {
        let sigma = spd(a, b, c);
        let inv = sigma.inverse().unwrap();
        let du = [p, q];
        let f = flux_with_inverse(&inv, &du);
        // ⟨F, Du⟩ = |Du|²/W ≥ 0 and |F|_σ = |Du|/W < 1.
        let pairing = f.flux[0] * p + f.flux[1] * q;
        prop_assert!(pairing >= 0.0);
        let norm = sigma.bilinear(&f.flux, &f.flux).sqrt();
        prop_assert!(norm < 1.0);
        let ev = f.derivative.symmetrized().symmetric_eigenvalues();
        prop_assert!(ev.iter().all(|&e| e > 0.0));
    }

    #[test]
    fn flux_derivative_matches_differences(a in -2.0..2.0f64, b in -2.0..2.0f64, c in -2.0..2.0f64,
                                           p in -3.0..3.0f64, q in -3.0..3.0f64) {
        let inv = spd(a, b, c).inverse().unwrap();
        let f = flux_with_inverse(&inv, &[p, q]);
        let h = 1e-6;
        for j in 0..2 {
            let mut plus = [p, q];
            let mut minus = [p, q];
            plus[j] += h;
            minus[j] -= h;
            let fp = flux_with_inverse(&inv, &plus).flux;
            let fm = flux_with_inverse(&inv, &minus).flux;
            for i in 0..2 {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                prop_assert!((fd - f.derivative[(i, j)]).abs() <= 1e-7 * (1.0 + fd.abs()));
            }
        }
    }

    #[test]
    fn ricci_identity_error_is_second_order(x in -0.5..0.5f64, y in -0.5..0.5f64) {
        let m = ConformalMetric::sphere(1.0f64);
        let s = vec![vec![x, y]];
        let (e1, _) = ricci_identity_error(&m, &QuarticTestFunction, &s, 2e-3).unwrap();
        let (e2, _) = ricci_identity_error(&m, &QuarticTestFunction, &s, 1e-3).unwrap();
        prop_assert!(e1 < 1e-4);
        prop_assert!(e1 / e2 > 3.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn mean_curvature_is_divergence_of_flux(x in -0.6..0.6f64, y in -0.6..0.6f64,
                                            a in -1.0..1.0f64, b in -1.0..1.0f64, c in -1.0..1.0f64) {
        let m = ConformalMetric::perturbed_flat(0.1f64);
        let u_grad = |p: &[f64]| [a + 2.0 * b * p[0] + c * p[1] + p[0] * p[0] + p[1] * p[1], c * p[0] - 0.5 * p[1] + 2.0 * p[0] * p[1]];
        let hess = |p: &[f64]| Matrix::from_row_slice(2, &[2.0 * b + 2.0 * p[0], c + 2.0 * p[1], c + 2.0 * p[1], -0.5 + 2.0 * p[0]]);
        let density_flux = |p: &[f64]| {
            let jet = build_jet(&m, p, false).unwrap();
            let f = flux_with_inverse(&jet.sigma_inv, &u_grad(p)).flux;
            [jet.sqrt_det * f[0], jet.sqrt_det * f[1]]
        };
        let h = 1e-4;
        let div = (density_flux(&[x + h, y])[0] - density_flux(&[x - h, y])[0]
            + density_flux(&[x, y + h])[1] - density_flux(&[x, y - h])[1]) / (2.0 * h);
        let jet = build_jet(&m, &[x, y], false).unwrap();
        let p = [x, y];
        let h_formula = mean_curvature(&jet, &u_grad(&p), &hess(&p));
        prop_assert!((div / jet.sqrt_det - h_formula).abs() <= 1e-6 * (1.0 + h_formula.abs()));
    }

    #[test]
    fn finite_difference_jet_converges(r in 0.3..1.2f64, t in 0.0..6.0f64) {
        let exact = PolarChartMetric::new(PolarProfile::Sphere { radius: 1.5f64 });
        let x = [r, t];
        let reference = build_jet(&exact, &x, true).unwrap();
        let err = |h: f64| {
            let fd = FiniteDifferenceMetric::new(exact.clone(), h);
            let j = build_jet(&fd, &x, true).unwrap();
            let rc = reference.riemann.as_ref().unwrap();
            (j.christoffel.max_abs_diff(&reference.christoffel), j.riemann.as_ref().unwrap().max_abs_diff(rc))
        };
        let (g1, r1) = err(4e-3);
        let (g2, r2) = err(2e-3);
        prop_assert!(g1 < 1e-4 && r1 < 1e-3);
        prop_assert!(g1 / g2 > 3.0 || g1 < 1e-10);
        prop_assert!(r1 / r2 > 3.0 || r1 < 1e-8);
    }
}

#[test]
fn sphere_chart_has_unit_curvature() {
    let m = ConformalMetric::sphere(1.0f64);
    for p in [[0.0, 0.0], [0.3, -0.4], [1.2, 0.7]] {
        let jet = build_jet(&m, &p, true).unwrap();
        let ric = jet.ricci.unwrap();
        let ev = ric.generalized_eigenvalues(&jet.sigma).unwrap();
        for e in ev {
            assert!((e - 1.0).abs() < 1e-10, "{e}");
        }
    }
    assert_eq!(MetricField::<f64>::dim(&m), 2);
}
