//! Curvature sign and the commutation rule for third covariant derivatives.

use crate::error::Result;
use crate::geometry::{build_jet, GeometryJet, MetricField};
use crate::linalg::{Matrix, Tensor3};

/// Smooth test function with closed-form gradient and Hessian.
pub trait TestFunction: Sync {
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    fn hessian(&self, x: &[f64]) -> Matrix<f64>;
}

/// `u = x⁴/12 + xy³/6 − x²y + 0.3x³ + y` (quartic, so central differences of
/// its chart Hessian are exact).
pub struct QuarticTestFunction;

impl TestFunction for QuarticTestFunction {
    fn gradient(&self, p: &[f64]) -> Vec<f64> {
        let (x, y) = (p[0], p[1]);
        vec![x.powi(3) / 3.0 + y.powi(3) / 6.0 - 2.0 * x * y + 0.9 * x * x, x * y * y / 2.0 - x * x + 1.0]
    }
    fn hessian(&self, p: &[f64]) -> Matrix<f64> {
        let (x, y) = (p[0], p[1]);
        let xy = y * y / 2.0 - 2.0 * x;
        Matrix::from_row_slice(2, &[x * x - 2.0 * y + 1.8 * x, xy, xy, x * y])
    }
}

fn covariant_hessian_at(jet: &GeometryJet<f64>, f: &dyn TestFunction) -> Matrix<f64> {
    crate::geometry::covariant_hessian(jet, &f.gradient(&jet.point), &f.hessian(&jet.point))
}

/// `∇_k H_ij` with `∂_k H_ij` by central differences of step `h`.
fn third_derivative<M: MetricField<f64> + ?Sized>(
    metric: &M,
    f: &dyn TestFunction,
    x: &[f64],
    h: f64,
) -> Result<(GeometryJet<f64>, Tensor3<f64>)> {
    let n = metric.dim();
    let jet = build_jet(metric, x, true)?;
    let hess = covariant_hessian_at(&jet, f);
    let mut out = Tensor3::zeros(n);
    for k in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[k] += h;
        xm[k] -= h;
        let hp = covariant_hessian_at(&build_jet(metric, &xp, false)?, f);
        let hm = covariant_hessian_at(&build_jet(metric, &xm, false)?, f);
        for i in 0..n {
            for j in 0..n {
                let mut v = (hp[(i, j)] - hm[(i, j)]) / (2.0 * h);
                for m in 0..n {
                    v -= jet.christoffel[(m, k, i)] * hess[(m, j)] + jet.christoffel[(m, k, j)] * hess[(i, m)];
                }
                out[(k, i, j)] = v;
            }
        }
    }
    Ok((jet, out))
}

/// Largest deviation of `u_kij − u_ijk` from `Rˡ_ikj u_l` over the samples,
/// relative to `max |Rˡ_ikj u_l|` (absolute when that vanishes), and the
/// absolute commutator size.
pub fn ricci_identity_error<M: MetricField<f64> + ?Sized>(
    metric: &M,
    f: &dyn TestFunction,
    samples: &[Vec<f64>],
    h: f64,
) -> Result<(f64, f64)> {
    let n = metric.dim();
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    let mut commutator_max = 0.0f64;
    for x in samples {
        let (jet, d) = third_derivative(metric, f, x, h)?;
        let riemann = jet.riemann.as_ref().expect("curvature requested");
        let du = f.gradient(x);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    // u_kij = ∇_j H_ki, u_ijk = ∇_k H_ij
                    let commutator = d[(j, k, i)] - d[(k, i, j)];
                    let curvature: f64 = (0..n).map(|l| riemann[(l, i, k, j)] * du[l]).sum();
                    worst = worst.max((commutator - curvature).abs());
                    scale = scale.max(curvature.abs());
                    commutator_max = commutator_max.max(commutator.abs());
                }
            }
        }
    }
    Ok((if scale > 0.0 { worst / scale } else { worst }, commutator_max))
}

/// Sample grid `[−r, r]²` with `k × k` points.
pub fn sample_grid(r: f64, k: usize) -> Vec<Vec<f64>> {
    let step = |i: usize| -r + 2.0 * r * i as f64 / (k - 1) as f64;
    (0..k).flat_map(|i| (0..k).map(move |j| vec![step(i), step(j)])).collect()
}
