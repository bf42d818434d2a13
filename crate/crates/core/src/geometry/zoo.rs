//! Analytic metrics used by the solver, the test-suite and the CLI.

use std::marker::PhantomData;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{fd_d2sigma, fd_dsigma, MetricField};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Tensor3, Tensor4};
use crate::Real;

/// Flat metric σ = I in any dimension.
#[derive(Clone, Debug)]
pub struct Euclidean<T> {
    dim: usize,
    _marker: PhantomData<T>,
}

impl<T> Euclidean<T> {
    pub fn new(dim: usize) -> Self {
        Euclidean { dim, _marker: PhantomData }
    }
}

impl<T: Real> MetricField<T> for Euclidean<T> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn sigma(&self, _x: &[T]) -> Matrix<T> {
        Matrix::identity(self.dim)
    }
    fn dsigma(&self, _x: &[T]) -> Tensor3<T> {
        Tensor3::zeros(self.dim)
    }
    fn d2sigma(&self, _x: &[T]) -> Tensor4<T> {
        Tensor4::zeros(self.dim)
    }
    fn label(&self) -> String {
        format!("euclidean(dim={})", self.dim)
    }
}

/// Constant (position independent) metric.
#[derive(Clone, Debug)]
pub struct ConstantMetric<T> {
    sigma: Matrix<T>,
}

impl<T: Real> ConstantMetric<T> {
    pub fn new(sigma: Matrix<T>) -> Self {
        ConstantMetric { sigma }
    }
}

impl<T: Real> MetricField<T> for ConstantMetric<T> {
    fn dim(&self) -> usize {
        self.sigma.dim()
    }
    fn sigma(&self, _x: &[T]) -> Matrix<T> {
        self.sigma.clone()
    }
    fn dsigma(&self, _x: &[T]) -> Tensor3<T> {
        Tensor3::zeros(self.sigma.dim())
    }
    fn d2sigma(&self, _x: &[T]) -> Tensor4<T> {
        Tensor4::zeros(self.sigma.dim())
    }
    fn label(&self) -> String {
        "constant".into()
    }
}

/// Warped profile `g(r)` of a geodesic polar chart.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PolarProfile<T> {
    /// `g = r²`
    Flat,
    /// `g = a² sin²(r/a)`
    Sphere { radius: T },
    /// `g = a² sinh²(r/a)`
    Hyperbolic { radius: T },
}

/// Geodesic polar chart `(r, θ)` with σ = diag(1, g(r)).
#[derive(Clone, Debug)]
pub struct PolarChartMetric<T> {
    profile: PolarProfile<T>,
}

impl<T: Real> PolarChartMetric<T> {
    pub fn new(profile: PolarProfile<T>) -> Self {
        PolarChartMetric { profile }
    }

    /// `(g, g', g'')` at radius `r`.
    fn profile(&self, r: T) -> (T, T, T) {
        let two = T::lit(2.0);
        match self.profile {
            PolarProfile::Flat => (r * r, two * r, two),
            PolarProfile::Sphere { radius: a } => {
                let s = (r / a).sin();
                (a * a * s * s, a * (two * r / a).sin(), two * (two * r / a).cos())
            }
            PolarProfile::Hyperbolic { radius: a } => {
                let s = (r / a).sinh();
                (a * a * s * s, a * (two * r / a).sinh(), two * (two * r / a).cosh())
            }
        }
    }
}

impl<T: Real> MetricField<T> for PolarChartMetric<T> {
    fn dim(&self) -> usize {
        2
    }
    fn sigma(&self, x: &[T]) -> Matrix<T> {
        let (g, _, _) = self.profile(x[0]);
        Matrix::from_diagonal(&[T::one(), g])
    }
    fn dsigma(&self, x: &[T]) -> Tensor3<T> {
        let (_, dg, _) = self.profile(x[0]);
        let mut d = Tensor3::zeros(2);
        d[(0, 1, 1)] = dg;
        d
    }
    fn d2sigma(&self, x: &[T]) -> Tensor4<T> {
        let (_, _, d2g) = self.profile(x[0]);
        let mut d = Tensor4::zeros(2);
        d[(0, 0, 1, 1)] = d2g;
        d
    }
    fn label(&self) -> String {
        match self.profile {
            PolarProfile::Flat => "polar-flat".into(),
            PolarProfile::Sphere { radius } => format!("sphere(radius={radius}, polar)"),
            PolarProfile::Hyperbolic { radius } => format!("hyperbolic(radius={radius}, polar)"),
        }
    }
}

/// Logarithm `f` of a conformal factor σ = e^{2f} I.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LogFactor<T> {
    /// Stereographic chart of the round sphere of radius `a`: e^{2f} = 4a⁴/(a² + |x|²)².
    Sphere { radius: T },
    /// Poincaré ball of curvature −1/a²: e^{2f} = 4a⁴/(a² − |x|²)², valid for |x| < a.
    Poincare { radius: T },
    /// Planar perturbation f = −δ(x² + 2y² + x³/2): Gauss curvature e^{−2f}δ(6 + 3x) > 0 for x > −2.
    Perturbed { amplitude: T },
}

/// Conformally flat metric σ = e^{2f(x)} I with analytic derivatives.
#[derive(Clone, Debug)]
pub struct ConformalMetric<T> {
    dim: usize,
    factor: LogFactor<T>,
}

impl<T: Real> ConformalMetric<T> {
    pub fn new(dim: usize, factor: LogFactor<T>) -> Self {
        ConformalMetric { dim, factor }
    }

    pub fn sphere(radius: T) -> Self {
        Self::new(2, LogFactor::Sphere { radius })
    }

    pub fn poincare(radius: T) -> Self {
        Self::new(2, LogFactor::Poincare { radius })
    }

    pub fn perturbed_flat(amplitude: T) -> Self {
        Self::new(2, LogFactor::Perturbed { amplitude })
    }

    pub fn factor(&self) -> LogFactor<T> {
        self.factor
    }

    /// `(f, ∂f, ∂²f)`.
    fn log_factor(&self, x: &[T]) -> (T, Vec<T>, Matrix<T>) {
        let n = self.dim;
        let two = T::lit(2.0);
        let four = T::lit(4.0);
        let r2: T = x.iter().map(|&v| v * v).sum();
        match self.factor {
            LogFactor::Sphere { radius: a } | LogFactor::Poincare { radius: a } => {
                // f = ln(2a²) − ln(a² ± r²)
                let sign = if matches!(self.factor, LogFactor::Sphere { .. }) { T::one() } else { -T::one() };
                let q = a * a + sign * r2;
                let f = (two * a * a).ln() - q.ln();
                let grad = x.iter().map(|&v| -two * sign * v / q).collect();
                let hess = Matrix::from_fn(n, |k, l| {
                    let d = if k == l { T::one() } else { T::zero() };
                    -two * sign * d / q + four * x[k] * x[l] / (q * q)
                });
                (f, grad, hess)
            }
            LogFactor::Perturbed { amplitude: d } => {
                let (px, py) = (x[0], x[1]);
                let half = T::lit(0.5);
                let f = -d * (px * px + two * py * py + half * px * px * px);
                let grad = vec![-d * (two * px + T::lit(1.5) * px * px), -d * four * py];
                let hess = Matrix::from_row_slice(2, &[-d * (two + T::lit(3.0) * px), T::zero(), T::zero(), -d * four]);
                (f, grad, hess)
            }
        }
    }
}

impl<T: Real> MetricField<T> for ConformalMetric<T> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn sigma(&self, x: &[T]) -> Matrix<T> {
        let (f, _, _) = self.log_factor(x);
        Matrix::identity(self.dim).scale((f + f).exp())
    }
    fn dsigma(&self, x: &[T]) -> Tensor3<T> {
        let n = self.dim;
        let (f, g, _) = self.log_factor(x);
        let e = (f + f).exp();
        let mut d = Tensor3::zeros(n);
        for k in 0..n {
            for i in 0..n {
                d[(k, i, i)] = T::lit(2.0) * g[k] * e;
            }
        }
        d
    }
    fn d2sigma(&self, x: &[T]) -> Tensor4<T> {
        let n = self.dim;
        let (f, g, h) = self.log_factor(x);
        let e = (f + f).exp();
        let mut d = Tensor4::zeros(n);
        for l in 0..n {
            for k in 0..n {
                let v = (T::lit(4.0) * g[k] * g[l] + T::lit(2.0) * h[(k, l)]) * e;
                for i in 0..n {
                    d[(l, k, i, i)] = v;
                }
            }
        }
        d
    }
    fn label(&self) -> String {
        match self.factor {
            LogFactor::Sphere { radius } => format!("sphere(radius={radius}, stereographic)"),
            LogFactor::Poincare { radius } => format!("hyperbolic(radius={radius}, poincare)"),
            LogFactor::Perturbed { amplitude } => format!("perturbed-flat(amplitude={amplitude})"),
        }
    }
}

/// Block-diagonal product metric σ_A(x_A) ⊕ σ_B(x_B).
pub struct ProductMetric<T> {
    a: Arc<dyn MetricField<T>>,
    b: Arc<dyn MetricField<T>>,
}

impl<T: Real> ProductMetric<T> {
    pub fn new(a: Arc<dyn MetricField<T>>, b: Arc<dyn MetricField<T>>) -> Self {
        ProductMetric { a, b }
    }
}

impl<T: Real> MetricField<T> for ProductMetric<T> {
    fn dim(&self) -> usize {
        self.a.dim() + self.b.dim()
    }
    fn sigma(&self, x: &[T]) -> Matrix<T> {
        let p = self.a.dim();
        let (sa, sb) = (self.a.sigma(&x[..p]), self.b.sigma(&x[p..]));
        Matrix::from_fn(self.dim(), |i, j| match (i < p, j < p) {
            (true, true) => sa[(i, j)],
            (false, false) => sb[(i - p, j - p)],
            _ => T::zero(),
        })
    }
    fn dsigma(&self, x: &[T]) -> Tensor3<T> {
        let (p, n) = (self.a.dim(), self.dim());
        let (da, db) = (self.a.dsigma(&x[..p]), self.b.dsigma(&x[p..]));
        let mut d = Tensor3::zeros(n);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    d[(k, i, j)] = match (k < p, i < p, j < p) {
                        (true, true, true) => da[(k, i, j)],
                        (false, false, false) => db[(k - p, i - p, j - p)],
                        _ => T::zero(),
                    };
                }
            }
        }
        d
    }
    fn d2sigma(&self, x: &[T]) -> Tensor4<T> {
        let (p, n) = (self.a.dim(), self.dim());
        let (da, db) = (self.a.d2sigma(&x[..p]), self.b.d2sigma(&x[p..]));
        let mut d = Tensor4::zeros(n);
        for l in 0..n {
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        d[(l, k, i, j)] = match (l < p, k < p, i < p, j < p) {
                            (true, true, true, true) => da[(l, k, i, j)],
                            (false, false, false, false) => db[(l - p, k - p, i - p, j - p)],
                            _ => T::zero(),
                        };
                    }
                }
            }
        }
        d
    }
    fn label(&self) -> String {
        format!("{} x {}", self.a.label(), self.b.label())
    }
}

/// Replaces the derivatives of `inner` by central differences with step `h`.
pub struct FiniteDifferenceMetric<M, T> {
    inner: M,
    h: T,
}

impl<M, T: Real> FiniteDifferenceMetric<M, T> {
    pub fn new(inner: M, h: T) -> Self {
        FiniteDifferenceMetric { inner, h }
    }
}

impl<T: Real, M: MetricField<T>> MetricField<T> for FiniteDifferenceMetric<M, T> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn sigma(&self, x: &[T]) -> Matrix<T> {
        self.inner.sigma(x)
    }
    fn dsigma(&self, x: &[T]) -> Tensor3<T> {
        fd_dsigma(|p| self.inner.sigma(p), self.dim(), x, self.h)
    }
    fn d2sigma(&self, x: &[T]) -> Tensor4<T> {
        fd_d2sigma(|p| self.inner.sigma(p), self.dim(), x, self.h)
    }
    fn label(&self) -> String {
        format!("{} (finite differences)", self.inner.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Chart {
    Stereographic,
    Poincare,
    Polar,
}

fn default_dim() -> usize {
    2
}
fn default_radius() -> f64 {
    1.0
}
fn default_amplitude() -> f64 {
    0.05
}

/// Named metric as it appears in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MetricSpec {
    Euclidean {
        #[serde(default = "default_dim")]
        dim: usize,
    },
    PolarFlat,
    Sphere {
        #[serde(default = "default_radius")]
        radius: f64,
        #[serde(default)]
        chart: Option<Chart>,
    },
    Hyperbolic {
        #[serde(default = "default_radius")]
        radius: f64,
        #[serde(default)]
        chart: Option<Chart>,
    },
    PerturbedFlat {
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
    /// Constant metric, row-major entries.
    Constant {
        entries: Vec<f64>,
    },
}

impl MetricSpec {
    pub fn build<T: Real>(&self) -> Result<Arc<dyn MetricField<T>>> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(T::lit(v))
            } else {
                Err(Error::InvalidArgument { name, reason: format!("must be positive (got {v})") })
            }
        };
        Ok(match self {
            MetricSpec::Euclidean { dim } => {
                if *dim < 1 {
                    return Err(Error::InvalidArgument { name: "metric.dim", reason: "must be >= 1".into() });
                }
                Arc::new(Euclidean::new(*dim))
            }
            MetricSpec::PolarFlat => Arc::new(PolarChartMetric::new(PolarProfile::Flat)),
            MetricSpec::Sphere { radius, chart } => {
                let radius = positive("metric.radius", *radius)?;
                match chart.unwrap_or(Chart::Stereographic) {
                    Chart::Stereographic => Arc::new(ConformalMetric::sphere(radius)),
                    Chart::Polar => Arc::new(PolarChartMetric::new(PolarProfile::Sphere { radius })),
                    Chart::Poincare => {
                        return Err(Error::InvalidArgument {
                            name: "metric.chart",
                            reason: "sphere supports stereographic or polar".into(),
                        })
                    }
                }
            }
            MetricSpec::Hyperbolic { radius, chart } => {
                let radius = positive("metric.radius", *radius)?;
                match chart.unwrap_or(Chart::Poincare) {
                    Chart::Poincare => Arc::new(ConformalMetric::poincare(radius)),
                    Chart::Polar => Arc::new(PolarChartMetric::new(PolarProfile::Hyperbolic { radius })),
                    Chart::Stereographic => {
                        return Err(Error::InvalidArgument {
                            name: "metric.chart",
                            reason: "hyperbolic supports poincare or polar".into(),
                        })
                    }
                }
            }
            MetricSpec::PerturbedFlat { amplitude } => {
                if !amplitude.is_finite() || *amplitude < 0.0 {
                    return Err(Error::InvalidArgument {
                        name: "metric.amplitude",
                        reason: format!("must be nonnegative (got {amplitude})"),
                    });
                }
                Arc::new(ConformalMetric::perturbed_flat(T::lit(*amplitude)))
            }
            MetricSpec::Constant { entries } => {
                let n = (entries.len() as f64).sqrt().round() as usize;
                if n == 0 || n * n != entries.len() {
                    return Err(Error::InvalidArgument {
                        name: "metric.entries",
                        reason: format!("expected n*n entries, got {}", entries.len()),
                    });
                }
                let m = Matrix::from_row_slice(n, &entries.iter().map(|&v| T::lit(v)).collect::<Vec<_>>());
                Arc::new(ConstantMetric::new(m))
            }
        })
    }

    /// Short name as written in configuration.
    pub fn name(&self) -> &'static str {
        match self {
            MetricSpec::Euclidean { .. } => "euclidean",
            MetricSpec::PolarFlat => "polar-flat",
            MetricSpec::Sphere { .. } => "sphere",
            MetricSpec::Hyperbolic { .. } => "hyperbolic",
            MetricSpec::PerturbedFlat { .. } => "perturbed-flat",
            MetricSpec::Constant { .. } => "constant",
        }
    }
}
