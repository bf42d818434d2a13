//! Pointwise Riemannian geometry on a coordinate chart.
//!
//! Index conventions used throughout:
//! - `dsigma[(k, i, j)] = ∂_k σ_ij`, `d2sigma[(l, k, i, j)] = ∂_l ∂_k σ_ij`
//! - `christoffel[(k, i, j)] = Γᵏ_ij`
//! - `riemann[(l, i, k, j)] = Rˡ_ikj = ∂_k Γˡ_ij − ∂_j Γˡ_ik + Γˡ_km Γᵐ_ij − Γˡ_jm Γᵐ_ik`
//! - `Ric_ij = Rᵏ_ikj`
//!
//! With these conventions the commutation rule for third covariant
//! derivatives of a function reads `u_kij = u_ijk + Rˡ_ikj u_l`, where
//! `u_abc` differentiates in the order `a`, `b`, `c`.

mod zoo;

pub use zoo::{
    ConformalMetric, ConstantMetric, Euclidean, FiniteDifferenceMetric, LogFactor, MetricSpec, PolarChartMetric,
    PolarProfile, ProductMetric,
};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Tensor3, Tensor4};
use crate::Real;

/// Riemannian metric σ_ij on a chart, with first and second derivatives.
///
/// Implementors provide at least [`MetricField::sigma`]; the derivative
/// methods default to central differences of `sigma`.
pub trait MetricField<T: Real>: Send + Sync {
    fn dim(&self) -> usize;

    fn sigma(&self, x: &[T]) -> Matrix<T>;

    fn dsigma(&self, x: &[T]) -> Tensor3<T> {
        fd_dsigma(|p| self.sigma(p), self.dim(), x, T::fd_step())
    }

    fn d2sigma(&self, x: &[T]) -> Tensor4<T> {
        fd_d2sigma(|p| self.sigma(p), self.dim(), x, T::fd_step_second())
    }

    /// Short human-readable label for reports.
    fn label(&self) -> String {
        "metric".into()
    }
}

impl<T: Real, M: MetricField<T> + ?Sized> MetricField<T> for std::sync::Arc<M> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn sigma(&self, x: &[T]) -> Matrix<T> {
        (**self).sigma(x)
    }
    fn dsigma(&self, x: &[T]) -> Tensor3<T> {
        (**self).dsigma(x)
    }
    fn d2sigma(&self, x: &[T]) -> Tensor4<T> {
        (**self).d2sigma(x)
    }
    fn label(&self) -> String {
        (**self).label()
    }
}

fn shifted<T: Real>(x: &[T], k: usize, h: T) -> Vec<T> {
    let mut p = x.to_vec();
    p[k] += h;
    p
}

/// Central differences of `sigma` with step `h`, `O(h²)`.
pub fn fd_dsigma<T: Real>(sigma: impl Fn(&[T]) -> Matrix<T>, n: usize, x: &[T], h: T) -> Tensor3<T> {
    let mut d = Tensor3::zeros(n);
    let two_h = T::lit(2.0) * h;
    for k in 0..n {
        let sp = sigma(&shifted(x, k, h));
        let sm = sigma(&shifted(x, k, -h));
        for i in 0..n {
            for j in 0..n {
                d[(k, i, j)] = (sp[(i, j)] - sm[(i, j)]) / two_h;
            }
        }
    }
    d
}

/// Second central differences of `sigma` with step `h`, `O(h²)`.
pub fn fd_d2sigma<T: Real>(sigma: impl Fn(&[T]) -> Matrix<T>, n: usize, x: &[T], h: T) -> Tensor4<T> {
    let mut d = Tensor4::zeros(n);
    let s0 = sigma(x);
    let two = T::lit(2.0);
    let four_h2 = T::lit(4.0) * h * h;
    for k in 0..n {
        let sp = sigma(&shifted(x, k, h));
        let sm = sigma(&shifted(x, k, -h));
        for i in 0..n {
            for j in 0..n {
                d[(k, k, i, j)] = (sp[(i, j)] - two * s0[(i, j)] + sm[(i, j)]) / (h * h);
            }
        }
        for l in 0..k {
            let pp = sigma(&shifted(&shifted(x, k, h), l, h));
            let pm = sigma(&shifted(&shifted(x, k, h), l, -h));
            let mp = sigma(&shifted(&shifted(x, k, -h), l, h));
            let mm = sigma(&shifted(&shifted(x, k, -h), l, -h));
            for i in 0..n {
                for j in 0..n {
                    let v = (pp[(i, j)] - pm[(i, j)] - mp[(i, j)] + mm[(i, j)]) / four_h2;
                    d[(k, l, i, j)] = v;
                    d[(l, k, i, j)] = v;
                }
            }
        }
    }
    d
}

/// Metric data at a point: inverse, volume density, connection and optionally curvature.
#[derive(Clone, Debug)]
pub struct GeometryJet<T> {
    pub point: Vec<T>,
    pub sigma: Matrix<T>,
    pub sigma_inv: Matrix<T>,
    /// `√det σ`.
    pub sqrt_det: T,
    pub christoffel: Tensor3<T>,
    pub riemann: Option<Tensor4<T>>,
    pub ricci: Option<Matrix<T>>,
}

impl<T: Real> GeometryJet<T> {
    pub fn dim(&self) -> usize {
        self.sigma.dim()
    }
}

/// Rejects σ whose smallest eigenvalue is below `1e-12 · trace σ`.
pub fn check_positive_definite<T: Real>(sigma: &Matrix<T>, x: &[T]) -> Result<()> {
    let min_ev = sigma.min_eigenvalue();
    let tol = T::lit(1e-12) * sigma.trace().abs();
    if !(min_ev > tol) {
        return Err(Error::NonPositiveDefiniteMetric {
            point: x.iter().map(|v| v.as_f64()).collect(),
            min_eigenvalue: min_ev.as_f64(),
        });
    }
    Ok(())
}

/// Evaluates σ, σ⁻¹, √det σ and Γ at `x`; with `with_curvature` also the
/// Riemann and Ricci tensors (requires second metric derivatives).
pub fn build_jet<T: Real, M: MetricField<T> + ?Sized>(
    metric: &M,
    x: &[T],
    with_curvature: bool,
) -> Result<GeometryJet<T>> {
    let n = metric.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    let sigma = metric.sigma(x);
    check_positive_definite(&sigma, x)?;
    let sigma_inv = sigma.inverse().ok_or_else(|| Error::NonPositiveDefiniteMetric {
        point: x.iter().map(|v| v.as_f64()).collect(),
        min_eigenvalue: 0.0,
    })?;
    let sqrt_det = sigma.determinant().sqrt();
    let ds = metric.dsigma(x);
    let half = T::lit(0.5);

    // first-kind symbols [ij, l] = ½(∂_i σ_jl + ∂_j σ_il − ∂_l σ_ij)
    let first_kind = |i: usize, j: usize, l: usize| half * (ds[(i, j, l)] + ds[(j, i, l)] - ds[(l, i, j)]);
    let mut christoffel = Tensor3::zeros(n);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                christoffel[(k, i, j)] = (0..n).map(|l| sigma_inv[(k, l)] * first_kind(i, j, l)).sum();
            }
        }
    }

    let (riemann, ricci) = if with_curvature {
        let (r, ric) = curvature(&sigma_inv, &ds, &metric.d2sigma(x), &christoffel);
        (Some(r), Some(ric))
    } else {
        (None, None)
    };

    Ok(GeometryJet { point: x.to_vec(), sigma, sigma_inv, sqrt_det, christoffel, riemann, ricci })
}

fn curvature<T: Real>(
    sigma_inv: &Matrix<T>,
    ds: &Tensor3<T>,
    d2s: &Tensor4<T>,
    gamma: &Tensor3<T>,
) -> (Tensor4<T>, Matrix<T>) {
    let n = sigma_inv.dim();
    let half = T::lit(0.5);

    // ∂_m σ^{kl} = −σ^{ka} ∂_m σ_ab σ^{bl}
    let mut dinv = Tensor3::zeros(n);
    for m in 0..n {
        for k in 0..n {
            for l in 0..n {
                let mut s = T::zero();
                for a in 0..n {
                    for b in 0..n {
                        s += sigma_inv[(k, a)] * ds[(m, a, b)] * sigma_inv[(b, l)];
                    }
                }
                dinv[(m, k, l)] = -s;
            }
        }
    }

    // dgamma[(m, k, i, j)] = ∂_m Γᵏ_ij
    let mut dgamma = Tensor4::zeros(n);
    for m in 0..n {
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut s = T::zero();
                    for l in 0..n {
                        let fk = half * (ds[(i, j, l)] + ds[(j, i, l)] - ds[(l, i, j)]);
                        let dfk = half * (d2s[(m, i, j, l)] + d2s[(m, j, i, l)] - d2s[(m, l, i, j)]);
                        s += dinv[(m, k, l)] * fk + sigma_inv[(k, l)] * dfk;
                    }
                    dgamma[(m, k, i, j)] = s;
                }
            }
        }
    }

    let mut riemann = Tensor4::zeros(n);
    for l in 0..n {
        for i in 0..n {
            for k in 0..n {
                for j in 0..n {
                    let mut v = dgamma[(k, l, i, j)] - dgamma[(j, l, i, k)];
                    for m in 0..n {
                        v += gamma[(l, k, m)] * gamma[(m, i, j)] - gamma[(l, j, m)] * gamma[(m, i, k)];
                    }
                    riemann[(l, i, k, j)] = v;
                }
            }
        }
    }
    let ricci = Matrix::from_fn(n, |i, j| (0..n).map(|k| riemann[(k, i, k, j)]).sum());
    (riemann, ricci)
}

/// Smallest eigenvalue of Ric measured against σ over the sample points.
pub fn ricci_min_eigenvalue<T: Real, M: MetricField<T> + ?Sized>(metric: &M, samples: &[Vec<T>]) -> Result<T> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument { name: "samples", reason: "must be nonempty".into() });
    }
    let mut min = T::infinity();
    for x in samples {
        let jet = build_jet(metric, x, true)?;
        let ric = jet.ricci.as_ref().expect("curvature requested");
        let ev = ric.generalized_eigenvalues(&jet.sigma).ok_or_else(|| Error::NonPositiveDefiniteMetric {
            point: x.iter().map(|v| v.as_f64()).collect(),
            min_eigenvalue: 0.0,
        })?;
        min = min.min(ev[0]);
    }
    Ok(min)
}

/// `|Du|²_σ` and `W = √(1 + |Du|²)` for a covector `du`.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientData<T> {
    pub du: Vec<T>,
    pub grad_sq: T,
    pub w: T,
}

pub fn gradient_data<T: Real>(sigma_inv: &Matrix<T>, du: &[T]) -> GradientData<T> {
    let grad_sq = sigma_inv.bilinear(du, du).max(T::zero());
    GradientData { du: du.to_vec(), grad_sq, w: (T::one() + grad_sq).sqrt() }
}

/// `D_iD_j u = ∂_i∂_j u − Γᵏ_ij u_k`.
pub fn covariant_hessian<T: Real>(jet: &GeometryJet<T>, du: &[T], d2u: &Matrix<T>) -> Matrix<T> {
    let n = jet.dim();
    Matrix::from_fn(n, |i, j| d2u[(i, j)] - (0..n).map(|k| jet.christoffel[(k, i, j)] * du[k]).sum::<T>())
}

/// `H = div_σ(Du/W) = (σⁱᵏ − DⁱuDᵏu/W²) D_iD_k u / W`.
///
/// This is the sign convention of the boundary-value problem
/// `div(Du/W) = λ`; the upward-normal mean curvature of the graph is `−H`.
pub fn mean_curvature<T: Real>(jet: &GeometryJet<T>, du: &[T], d2u: &Matrix<T>) -> T {
    let n = jet.dim();
    let hess = covariant_hessian(jet, du, d2u);
    let g = gradient_data(&jet.sigma_inv, du);
    let raised = jet.sigma_inv.mul_vec(du);
    let w2 = g.w * g.w;
    let mut s = T::zero();
    for i in 0..n {
        for k in 0..n {
            s += (jet.sigma_inv[(i, k)] - raised[i] * raised[k] / w2) * hess[(i, k)];
        }
    }
    s / g.w
}

/// Flux `Fⁱ = σⁱᵏu_k/W` and its derivative `∂Fⁱ/∂u_j = aⁱʲ/W³` with
/// `aⁱʲ = W²σⁱʲ − DⁱuDʲu`.
#[derive(Clone, Debug)]
pub struct Flux<T> {
    pub w: T,
    pub flux: Vec<T>,
    pub derivative: Matrix<T>,
}

pub fn flux_with_inverse<T: Real>(sigma_inv: &Matrix<T>, du: &[T]) -> Flux<T> {
    let n = sigma_inv.dim();
    let g = gradient_data(sigma_inv, du);
    let raised = sigma_inv.mul_vec(du);
    let w2 = g.w * g.w;
    let w3 = w2 * g.w;
    let flux = raised.iter().map(|&r| r / g.w).collect();
    let derivative = Matrix::from_fn(n, |i, j| (w2 * sigma_inv[(i, j)] - raised[i] * raised[j]) / w3);
    Flux { w: g.w, flux, derivative }
}

pub fn flux_and_derivative<T: Real>(jet: &GeometryJet<T>, du: &[T]) -> (Vec<T>, Matrix<T>) {
    let f = flux_with_inverse(&jet.sigma_inv, du);
    (f.flux, f.derivative)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn polar_flat() -> PolarChartMetric<f64> {
        PolarChartMetric::new(PolarProfile::Flat)
    }

    #[test]
    fn euclidean_jet_is_flat() {
        let jet = build_jet(&Euclidean::new(3), &[0.3, -1.0, 2.0], true).unwrap();
        assert_eq!(jet.christoffel.max_abs(), 0.0);
        assert_eq!(jet.riemann.unwrap().max_abs(), 0.0);
        assert_eq!(jet.ricci.unwrap().max_abs(), 0.0);
        assert_eq!(jet.sqrt_det, 1.0);
    }

    // Reference values from hand differentiation of σ = diag(1, r²):
    // Γ^r_θθ = −r, Γ^θ_rθ = 1/r.
    #[test]
    fn polar_chart_christoffels() {
        let jet = build_jet(&polar_flat(), &[2.0, 0.7], true).unwrap();
        assert!((jet.christoffel[(0, 1, 1)] + 2.0).abs() < 1e-14);
        assert!((jet.christoffel[(1, 0, 1)] - 0.5).abs() < 1e-14);
        assert!((jet.christoffel[(1, 1, 0)] - 0.5).abs() < 1e-14);
        assert!(jet.ricci.unwrap().max_abs() < 1e-13);
        let id = jet.sigma_inv.mul(&jet.sigma).sub(&Matrix::identity(2));
        assert!(id.max_abs() < 1e-12);
    }

    #[test]
    fn sphere_polar_chart_has_unit_ricci() {
        let m = PolarChartMetric::new(PolarProfile::Sphere { radius: 1.0 });
        let jet = build_jet(&m, &[PI / 4.0, 0.3], true).unwrap();
        let ric = jet.ricci.unwrap();
        assert!(ric.sub(&jet.sigma).max_abs() < 1e-12, "{ric:?}");
    }

    #[test]
    fn ricci_min_eigenvalue_signs() {
        let samples: Vec<Vec<f64>> = (0..9).map(|k| vec![0.1 + (PI - 0.2) * k as f64 / 8.0, 0.2]).collect();
        let sphere = PolarChartMetric::new(PolarProfile::Sphere { radius: 1.0 });
        assert!((ricci_min_eigenvalue(&sphere, &samples).unwrap() - 1.0).abs() < 1e-8);
        let hyp = PolarChartMetric::new(PolarProfile::Hyperbolic { radius: 1.0 });
        assert!((ricci_min_eigenvalue(&hyp, &samples).unwrap() + 1.0).abs() < 1e-8);
        assert_eq!(ricci_min_eigenvalue(&Euclidean::new(2), &samples).unwrap(), 0.0);
        assert!(ricci_min_eigenvalue(&Euclidean::<f64>::new(2), &[]).is_err());
    }

    #[test]
    fn polar_hessian_of_r_squared() {
        // u = r²: u_r = 2, ∂²_θ u = 0, so (D²u)_θθ = 0 − Γ^r_θθ u_r = 2 at r = 1.
        let jet = build_jet(&polar_flat(), &[1.0, 0.4], false).unwrap();
        let d2u = Matrix::from_row_slice(2, &[2.0, 0.0, 0.0, 0.0]);
        let h = covariant_hessian(&jet, &[2.0, 0.0], &d2u);
        assert!((h[(1, 1)] - 2.0).abs() < 1e-14);
        assert!((h[(0, 0)] - 2.0).abs() < 1e-14);
        assert!(h.is_symmetric(0.0));
    }

    #[test]
    fn hessian_of_constant_vanishes() {
        let m = PolarChartMetric::new(PolarProfile::Sphere { radius: 2.0 });
        let jet = build_jet(&m, &[0.8, 0.1], false).unwrap();
        let h = covariant_hessian(&jet, &[0.0, 0.0], &Matrix::zeros(2));
        assert_eq!(h.max_abs(), 0.0);
        assert_eq!(mean_curvature(&jet, &[0.0, 0.0], &Matrix::zeros(2)), 0.0);
    }

    #[test]
    fn lower_hemisphere_mean_curvature() {
        // u = −√(ρ² − |x|²), ρ = 2, at x = (1, 0): H = 2/ρ = 1.
        let rho: f64 = 2.0;
        let x = [1.0, 0.0];
        let s = (rho * rho - x[0] * x[0] - x[1] * x[1]).sqrt();
        let du = [x[0] / s, x[1] / s];
        let d2u = Matrix::from_fn(2, |i, j| (if i == j { 1.0 } else { 0.0 }) / s + x[i] * x[j] / (s * s * s));
        let jet = build_jet(&Euclidean::new(2), &x, false).unwrap();
        assert!((mean_curvature(&jet, &du, &d2u) - 1.0).abs() < 1e-14);
        let affine = mean_curvature(&jet, &[0.3, -2.0], &Matrix::zeros(2));
        assert_eq!(affine, 0.0);
    }

    #[test]
    fn flux_examples() {
        let jet = build_jet(&Euclidean::new(2), &[0.0, 0.0], false).unwrap();
        let (f, df) = flux_and_derivative(&jet, &[0.0, 0.0]);
        assert_eq!(f, vec![0.0, 0.0]);
        assert_eq!(df, Matrix::identity(2));
        let (f, _) = flux_and_derivative(&jet, &[3.0, 4.0]);
        let w = 26f64.sqrt();
        assert!((f[0] - 3.0 / w).abs() < 1e-15 && (f[1] - 4.0 / w).abs() < 1e-15);
        assert!((f[0] * f[0] + f[1] * f[1]).sqrt() < 1.0);
    }

    #[test]
    fn non_positive_metric_rejected() {
        let m = ConstantMetric::new(Matrix::from_row_slice(2, &[1.0, 2.0, 2.0, 1.0]));
        assert!(matches!(build_jet(&m, &[0.0, 0.0], false), Err(Error::NonPositiveDefiniteMetric { .. })));
        assert!(matches!(build_jet(&Euclidean::<f64>::new(2), &[0.0], false), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn jet_in_single_precision() {
        let m = ConformalMetric::<f32>::sphere(1.0);
        let jet = build_jet(&m, &[0.2, -0.1], true).unwrap();
        let ev = jet.ricci.unwrap().generalized_eigenvalues(&jet.sigma).unwrap();
        assert!((ev[0] - 1.0).abs() < 1e-3, "{ev:?}");
    }
}
