//! Neumann data, reference functions `u₀` and seeded perturbations.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assembly::PenalizedProblem;
use crate::domain::TriangulatedDomain;
use crate::error::{Error, Result};
use crate::geometry::{build_jet, MetricField};
use crate::Real;

fn one() -> u32 {
    1
}

/// Boundary data φ as it appears in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PhiSpec {
    Constant {
        value: f64,
    },
    /// `mean + amplitude·cos(mode·θ)`, θ the polar angle about the domain centroid.
    Cosine {
        mean: f64,
        amplitude: f64,
        #[serde(default = "one")]
        mode: u32,
    },
    /// Whitespace-separated values, one per boundary vertex (in boundary
    /// order) or one per mesh vertex.
    File {
        path: PathBuf,
    },
}

impl PhiSpec {
    /// φ at every boundary vertex, in boundary order.
    pub fn sample<T: Real>(&self, dom: &TriangulatedDomain<T>) -> Result<Vec<T>> {
        let b = dom.boundary();
        let values = match self {
            PhiSpec::Constant { value } => vec![T::lit(*value); b.len()],
            PhiSpec::Cosine { mean, amplitude, mode } => {
                let c = dom.centroid();
                b.iter()
                    .map(|&v| {
                        let p = dom.vertices()[v];
                        let theta = (p[1] - c[1]).atan2(p[0] - c[0]);
                        T::lit(*mean) + T::lit(*amplitude) * (T::lit(*mode as f64) * theta).cos()
                    })
                    .collect()
            }
            PhiSpec::File { path } => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                let mut values = Vec::new();
                for (line, l) in text.lines().enumerate() {
                    for tok in l.split_whitespace() {
                        let v: f64 = tok
                            .parse()
                            .map_err(|_| Error::Parse { line: line + 1, reason: format!("invalid number {tok:?}") })?;
                        values.push(T::lit(v));
                    }
                }
                if values.len() == dom.num_vertices() {
                    b.iter().map(|&v| values[v]).collect()
                } else if values.len() == b.len() {
                    values
                } else {
                    return Err(Error::InvalidArgument {
                        name: "phi.path",
                        reason: format!(
                            "{} values, expected {} (boundary) or {} (vertices)",
                            values.len(),
                            b.len(),
                            dom.num_vertices()
                        ),
                    });
                }
            }
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument { name: "phi", reason: "must be finite".into() });
        }
        Ok(values)
    }
}

/// Reference function `u₀` with `D_ν u₀ = φ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum U0Spec {
    /// `offset` plus the cut-off boundary-layer extension of φ.
    Compatible {
        #[serde(default)]
        offset: f64,
    },
    /// `−√(ρ² − |x − center|²)`.
    SphericalCap {
        rho: f64,
        #[serde(default)]
        center: [f64; 2],
    },
}

impl Default for U0Spec {
    fn default() -> Self {
        U0Spec::Compatible { offset: 0.0 }
    }
}

impl U0Spec {
    pub fn build<T: Real, M: MetricField<T> + ?Sized>(
        &self,
        dom: &TriangulatedDomain<T>,
        metric: &M,
        phi: &[T],
    ) -> Result<Vec<T>> {
        match self {
            U0Spec::Compatible { offset } => {
                let base = compatible_u0(dom, metric, phi)?;
                Ok(base.into_iter().map(|v| v + T::lit(*offset)).collect())
            }
            U0Spec::SphericalCap { rho, center } => {
                let rho = T::lit(*rho);
                dom.vertices()
                    .iter()
                    .map(|p| {
                        let r2 = (p[0] - T::lit(center[0])).powi(2) + (p[1] - T::lit(center[1])).powi(2);
                        if r2 < rho * rho {
                            Ok(-(rho * rho - r2).sqrt())
                        } else {
                            Err(Error::InvalidArgument {
                                name: "u0.rho",
                                reason: "cap radius must exceed the domain extent".into(),
                            })
                        }
                    })
                    .collect()
            }
        }
    }
}

/// `u₀(x) = φ̃(q)·s(δ)/|n̂|_{σ⁻¹}(q)` where `δ` is the chart distance from `x`
/// to its nearest boundary point `q`, `n̂` the inward Euclidean unit normal
/// of that boundary edge and `s(δ) = δ(1 − δ/δ₀)²` cut off at
/// `δ₀ = 0.3·inradius`. Then `D_ν u₀ = φ` on the boundary and `u₀ ≡ 0` once
/// `φ ≡ 0`.
pub fn compatible_u0<T: Real, M: MetricField<T> + ?Sized>(
    dom: &TriangulatedDomain<T>,
    metric: &M,
    phi: &[T],
) -> Result<Vec<T>> {
    let nb = dom.boundary().len();
    if phi.len() != nb {
        return Err(Error::DimensionMismatch { expected: nb, got: phi.len() });
    }
    if phi.iter().all(|v| *v == T::zero()) {
        return Ok(vec![T::zero(); dom.num_vertices()]);
    }
    let delta0 = T::lit(0.3) * dom.inradius();
    let edges: Vec<[usize; 2]> = dom.boundary_edges().collect();
    let mut u0 = Vec::with_capacity(dom.num_vertices());
    for &x in dom.vertices() {
        let mut best = (T::infinity(), 0, T::zero());
        for (k, &[a, b]) in edges.iter().enumerate() {
            let (pa, pb) = (dom.vertices()[a], dom.vertices()[b]);
            let e = [pb[0] - pa[0], pb[1] - pa[1]];
            let len2 = e[0] * e[0] + e[1] * e[1];
            let s = (((x[0] - pa[0]) * e[0] + (x[1] - pa[1]) * e[1]) / len2).max(T::zero()).min(T::one());
            let d = ((x[0] - pa[0] - s * e[0]).powi(2) + (x[1] - pa[1] - s * e[1]).powi(2)).sqrt();
            if d < best.0 {
                best = (d, k, s);
            }
        }
        let (delta, k, s) = best;
        if delta >= delta0 {
            u0.push(T::zero());
            continue;
        }
        let [a, b] = edges[k];
        let (pa, pb) = (dom.vertices()[a], dom.vertices()[b]);
        let e = [pb[0] - pa[0], pb[1] - pa[1]];
        let len = (e[0] * e[0] + e[1] * e[1]).sqrt();
        let n_hat = [-e[1] / len, e[0] / len];
        let q = [pa[0] + s * e[0], pa[1] + s * e[1]];
        let jet = build_jet(metric, &q, false)?;
        let dual_norm = jet.sigma_inv.bilinear(&n_hat, &n_hat).sqrt();
        let phi_q = (T::one() - s) * phi[k] + s * phi[(k + 1) % nb];
        let cut = T::one() - delta / delta0;
        u0.push(phi_q * delta * cut * cut / dual_norm);
    }
    Ok(u0)
}

/// Discrete `div_σ(Du₀/W₀)` per vertex: the weak residual with zero reaction
/// divided by the lumped mass, with opposite sign.
pub fn discrete_mean_curvature<T: Real>(p: &PenalizedProblem<T>, u: &[T]) -> Result<Vec<T>> {
    let zero = vec![T::zero(); p.num_vertices()];
    let r = p.residual_with_reaction(u, &zero)?;
    Ok(r.iter().zip(p.discretization().lumped_mass()).map(|(&rk, &m)| -rk / m).collect())
}

/// `M = 1 + max|u₀| + max|div_σ(Du₀/W₀)|`.
pub fn barrier_constant<T: Real>(p: &PenalizedProblem<T>, u0: &[T]) -> Result<T> {
    let h = discrete_mean_curvature(p, u0)?;
    let max_abs = |v: &[T]| v.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    Ok(T::one() + max_abs(u0) + max_abs(&h))
}

/// A seeded smooth bump of height `amplitude` that vanishes outside a
/// disk lying well inside the domain, so boundary data are untouched.
pub fn interior_bump<T: Real>(dom: &TriangulatedDomain<T>, amplitude: T, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth: Vec<T> = dom.vertices().iter().map(|&v| dom.distance_to_boundary(v).0).collect();
    let inradius = depth.iter().copied().fold(T::zero(), T::max);
    let deep: Vec<usize> = (0..depth.len()).filter(|&i| depth[i] >= T::lit(0.5) * inradius).collect();
    let center = dom.vertices()[deep[rng.gen_range(0..deep.len())]];
    let radius = T::lit(0.8) * dom.distance_to_boundary(center).0;
    let sign = if rng.gen_bool(0.5) { T::one() } else { -T::one() };
    dom.vertices()
        .iter()
        .map(|p| {
            let t2 = ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)) / (radius * radius);
            if t2 < T::one() {
                sign * amplitude * (T::one() - T::one() / (T::one() - t2)).exp()
            } else {
                T::zero()
            }
        })
        .collect()
}
