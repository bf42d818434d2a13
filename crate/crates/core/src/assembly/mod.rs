//! Piecewise-linear weak form of `div_σ(Du/W) = υ + εu`, `D_ν u = φ`.
//!
//! For the hat function `v_k` the residual is
//!
//! ```text
//! R_k = Σ_T w_T ⟨F(Du), Dv_k⟩ + m_k (υ + ε u_k) + Σ_e Σ_q ½ L_q (φ_q / W_q) v_k(q)
//! ```
//!
//! with `F = σ⁻¹Du/W` at the triangle centroid, `w_T = √det σ(c_T)·|T|`,
//! lumped masses `m_k = Σ_{T ∋ k} w_T / 3`, and two-point Gauss on each
//! boundary edge. On the boundary `W_q = √(1 + t² + φ_q²)` where `t` is the
//! derivative of `u` along the edge per unit σ-length `L_q`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::domain::{gauss2, TriangulatedDomain};
use crate::error::{Error, Result};
use crate::geometry::{build_jet, flux_with_inverse, gradient_data, MetricField};
use crate::linalg::Matrix;
use crate::sparse::{CsrMatrix, SparsePattern};
use crate::Real;

/// Per-vertex values of the unknown.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteField<T>(Vec<T>);

impl<T: Real> DiscreteField<T> {
    pub fn new(values: Vec<T>, num_vertices: usize) -> Result<Self> {
        if values.len() != num_vertices {
            return Err(Error::DimensionMismatch { expected: num_vertices, got: values.len() });
        }
        if let Some(v) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument { name: "u", reason: format!("non-finite value at vertex {v}") });
        }
        Ok(DiscreteField(values))
    }

    pub fn constant(value: T, num_vertices: usize) -> Self {
        DiscreteField(vec![value; num_vertices])
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `u − c` at every vertex.
    pub fn shifted(&self, c: T) -> Self {
        DiscreteField(self.0.iter().map(|&v| v - c).collect())
    }
}

impl<T> std::ops::Deref for DiscreteField<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.0
    }
}

struct TriangleData<T> {
    vertices: [usize; 3],
    /// Chart gradients of the three hat functions.
    grads: [[T; 2]; 3],
    sigma_inv: Matrix<T>,
    weight: T,
    slots: [usize; 9],
}

struct GaussPoint<T> {
    s: T,
    /// σ-length of the edge vector at this point.
    length: T,
}

struct EdgeData<T> {
    a: usize,
    b: usize,
    /// Positions of `a` and `b` in the boundary loop.
    pos: [usize; 2],
    points: [GaussPoint<T>; 2],
    /// Slots `(a,a) (a,b) (b,a) (b,b)`.
    slots: [usize; 4],
}

/// Metric and mesh dependent data shared by every problem on one mesh.
pub struct Discretization<T> {
    metric: Arc<dyn MetricField<T>>,
    domain: Arc<TriangulatedDomain<T>>,
    triangles: Vec<TriangleData<T>>,
    edges: Vec<EdgeData<T>>,
    lumped_mass: Vec<T>,
    diag_slots: Vec<usize>,
    pattern: Arc<SparsePattern>,
    volume: T,
}

impl<T: Real> Discretization<T> {
    pub fn new(metric: Arc<dyn MetricField<T>>, domain: Arc<TriangulatedDomain<T>>) -> Result<Self> {
        if metric.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: metric.dim() });
        }
        let nv = domain.num_vertices();
        let pattern = Arc::new(SparsePattern::from_couplings(
            nv,
            domain.triangles().iter().flat_map(|t| (0..3).flat_map(move |i| (0..3).map(move |j| (t[i], t[j])))),
        ));
        let slot = |r, c| pattern.slot(r, c).expect("coupling present in pattern");
        let third = T::one() / T::lit(3.0);
        let mut lumped_mass = vec![T::zero(); nv];
        let mut triangles = Vec::with_capacity(domain.triangles().len());
        for (t, &tri) in domain.triangles().iter().enumerate() {
            let [p0, p1, p2] = domain.triangle_points(t);
            let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
            let area = T::lit(0.5) * det;
            let grads = [
                [(p1[1] - p2[1]) / det, (p2[0] - p1[0]) / det],
                [(p2[1] - p0[1]) / det, (p0[0] - p2[0]) / det],
                [(p0[1] - p1[1]) / det, (p1[0] - p0[0]) / det],
            ];
            let c = [(p0[0] + p1[0] + p2[0]) * third, (p0[1] + p1[1] + p2[1]) * third];
            let jet = build_jet(&*metric, &c, false)?;
            let weight = jet.sqrt_det * area;
            let mut slots = [0; 9];
            for i in 0..3 {
                lumped_mass[tri[i]] += weight * third;
                for j in 0..3 {
                    slots[3 * i + j] = slot(tri[i], tri[j]);
                }
            }
            triangles.push(TriangleData { vertices: tri, grads, sigma_inv: jet.sigma_inv, weight, slots });
        }
        let g = gauss2::<T>();
        let nb = domain.boundary().len();
        let mut edges = Vec::with_capacity(nb);
        for (k, [a, b]) in domain.boundary_edges().enumerate() {
            let (pa, pb) = (domain.vertices()[a], domain.vertices()[b]);
            let e = [pb[0] - pa[0], pb[1] - pa[1]];
            let point = |s: T| {
                let x = [pa[0] + s * e[0], pa[1] + s * e[1]];
                GaussPoint { s, length: metric.sigma(&x).bilinear(&e, &e).sqrt() }
            };
            edges.push(EdgeData {
                a,
                b,
                pos: [k, (k + 1) % nb],
                points: [point(g[0]), point(g[1])],
                slots: [slot(a, a), slot(a, b), slot(b, a), slot(b, b)],
            });
        }
        let diag_slots = (0..nv).map(|k| slot(k, k)).collect();
        let volume = triangles.iter().map(|t| t.weight).sum();
        Ok(Discretization { metric, domain, triangles, edges, lumped_mass, diag_slots, pattern, volume })
    }

    pub fn metric(&self) -> &Arc<dyn MetricField<T>> {
        &self.metric
    }

    pub fn domain(&self) -> &Arc<TriangulatedDomain<T>> {
        &self.domain
    }

    pub fn lumped_mass(&self) -> &[T] {
        &self.lumped_mass
    }

    /// `Vol_σ(Ω)` under the centroid rule.
    pub fn volume(&self) -> T {
        self.volume
    }

    pub fn pattern(&self) -> &Arc<SparsePattern> {
        &self.pattern
    }

    /// σ-length of each boundary edge, in boundary order.
    pub fn boundary_edge_lengths(&self) -> Vec<T> {
        let half = T::lit(0.5);
        self.edges.iter().map(|e| half * (e.points[0].length + e.points[1].length)).collect()
    }

    fn triangle_gradient(&self, t: &TriangleData<T>, u: &[T]) -> [T; 2] {
        let mut du = [T::zero(); 2];
        for i in 0..3 {
            du[0] += u[t.vertices[i]] * t.grads[i][0];
            du[1] += u[t.vertices[i]] * t.grads[i][1];
        }
        du
    }

    /// `|Du|_σ` at each triangle centroid.
    pub fn gradient_norms(&self, u: &[T]) -> Vec<T> {
        self.triangles
            .par_iter()
            .map(|t| gradient_data(&t.sigma_inv, &self.triangle_gradient(t, u)).grad_sq.sqrt())
            .collect()
    }
}

/// One instance of the penalized problem `(∗_{ε,υ})` on a fixed discretization.
#[derive(Clone)]
pub struct PenalizedProblem<T> {
    disc: Arc<Discretization<T>>,
    /// Neumann data at the boundary vertices, in boundary order.
    phi: Arc<Vec<T>>,
    eps: T,
    upsilon: T,
}

impl<T: Real> PenalizedProblem<T> {
    pub fn new(disc: Arc<Discretization<T>>, phi: Vec<T>, eps: T, upsilon: T) -> Result<Self> {
        let nb = disc.domain.boundary().len();
        if phi.len() != nb {
            return Err(Error::DimensionMismatch { expected: nb, got: phi.len() });
        }
        if phi.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument { name: "phi", reason: "must be finite".into() });
        }
        check_eps(eps)?;
        if !upsilon.is_finite() {
            return Err(Error::InvalidArgument { name: "upsilon", reason: "must be finite".into() });
        }
        Ok(PenalizedProblem { disc, phi: Arc::new(phi), eps, upsilon })
    }

    pub fn with_eps(&self, eps: T) -> Result<Self> {
        check_eps(eps)?;
        Ok(PenalizedProblem { eps, ..self.clone() })
    }

    pub fn with_upsilon(&self, upsilon: T) -> Self {
        PenalizedProblem { upsilon, ..self.clone() }
    }

    pub fn discretization(&self) -> &Arc<Discretization<T>> {
        &self.disc
    }

    pub fn domain(&self) -> &TriangulatedDomain<T> {
        &self.disc.domain
    }

    pub fn num_vertices(&self) -> usize {
        self.disc.domain.num_vertices()
    }

    pub fn phi(&self) -> &[T] {
        &self.phi
    }

    pub fn eps(&self) -> T {
        self.eps
    }

    pub fn upsilon(&self) -> T {
        self.upsilon
    }

    /// `υ + εu` at every vertex.
    pub fn lambda_field(&self, u: &[T]) -> Vec<T> {
        u.iter().map(|&v| self.upsilon + self.eps * v).collect()
    }

    fn check_len(&self, u: &[T]) -> Result<()> {
        if u.len() != self.num_vertices() {
            return Err(Error::DimensionMismatch { expected: self.num_vertices(), got: u.len() });
        }
        Ok(())
    }

    /// Boundary flux `g = φ_q/W_q` and `dg/dt` at one Gauss point.
    fn boundary_flux(&self, e: &EdgeData<T>, q: &GaussPoint<T>, u: &[T]) -> (T, T) {
        let phi = (T::one() - q.s) * self.phi[e.pos[0]] + q.s * self.phi[e.pos[1]];
        let t = (u[e.b] - u[e.a]) / q.length;
        let w = (T::one() + t * t + phi * phi).sqrt();
        (phi / w, -phi * t / (w * w * w))
    }

    /// Weak residual with the reaction term `υ + εu` replaced by `reaction`.
    pub fn residual_with_reaction(&self, u: &[T], reaction: &[T]) -> Result<Vec<T>> {
        self.check_len(u)?;
        self.check_len(reaction)?;
        let d = &*self.disc;
        let local: Vec<[T; 3]> = d
            .triangles
            .par_iter()
            .map(|t| {
                let f = flux_with_inverse(&t.sigma_inv, &self.disc.triangle_gradient(t, u)).flux;
                t.grads.map(|g| t.weight * (f[0] * g[0] + f[1] * g[1]))
            })
            .collect();
        let mut r: Vec<T> = reaction.iter().zip(&d.lumped_mass).map(|(&f, &m)| m * f).collect();
        for (t, contrib) in d.triangles.iter().zip(&local) {
            for i in 0..3 {
                r[t.vertices[i]] += contrib[i];
            }
        }
        let half = T::lit(0.5);
        for e in &d.edges {
            for q in &e.points {
                let (g, _) = self.boundary_flux(e, q, u);
                let w = half * q.length * g;
                r[e.a] += w * (T::one() - q.s);
                r[e.b] += w * q.s;
            }
        }
        if let Some(vertex) = r.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteResidual { vertex });
        }
        Ok(r)
    }

    pub fn residual(&self, u: &[T]) -> Result<Vec<T>> {
        self.residual_with_reaction(u, &self.lambda_field(u))
    }

    /// Exact derivative of [`Self::residual`]. The boundary block is not
    /// symmetric unless `φ ≡ 0` or `u` is constant along the boundary.
    pub fn jacobian(&self, u: &[T]) -> Result<CsrMatrix<T>> {
        self.assemble_matrix(u, false)
    }

    /// Lagged-diffusivity matrix: volume term `σ⁻¹/W` with `W` frozen at `u`,
    /// plus the mass term. Symmetric positive definite.
    pub fn lagged_jacobian(&self, u: &[T]) -> Result<CsrMatrix<T>> {
        self.assemble_matrix(u, true)
    }

    fn assemble_matrix(&self, u: &[T], lagged: bool) -> Result<CsrMatrix<T>> {
        self.check_len(u)?;
        let d = &*self.disc;
        let local: Vec<[T; 9]> = d
            .triangles
            .par_iter()
            .map(|t| {
                let f = flux_with_inverse(&t.sigma_inv, &self.disc.triangle_gradient(t, u));
                let a = if lagged { t.sigma_inv.scale(T::one() / f.w) } else { f.derivative };
                let mut k = [T::zero(); 9];
                for i in 0..3 {
                    let gi = t.grads[i];
                    for j in 0..3 {
                        let gj = t.grads[j];
                        k[3 * i + j] = t.weight
                            * (gi[0] * (a[(0, 0)] * gj[0] + a[(0, 1)] * gj[1])
                                + gi[1] * (a[(1, 0)] * gj[0] + a[(1, 1)] * gj[1]));
                    }
                }
                k
            })
            .collect();
        let mut jac = CsrMatrix::zeros(d.pattern.clone());
        let vals = jac.values_mut();
        for (t, k) in d.triangles.iter().zip(&local) {
            for (slot, v) in t.slots.iter().zip(k) {
                vals[*slot] += *v;
            }
        }
        for (slot, m) in d.diag_slots.iter().zip(&d.lumped_mass) {
            vals[*slot] += self.eps * *m;
        }
        if lagged {
            return Ok(jac);
        }
        let half = T::lit(0.5);
        for e in &d.edges {
            for q in &e.points {
                let (_, dg) = self.boundary_flux(e, q, u);
                // ∂/∂u_b of ½L_q g v_k(q) is ½ v_k(q) dg/dt; ∂/∂u_a is its negative.
                let (va, vb) = (half * (T::one() - q.s) * dg, half * q.s * dg);
                vals[e.slots[0]] -= va;
                vals[e.slots[1]] += va;
                vals[e.slots[2]] -= vb;
                vals[e.slots[3]] += vb;
            }
        }
        Ok(jac)
    }

    /// Volume and mass part of the Jacobian (symmetric by construction).
    pub fn jacobian_volume_part(&self, u: &[T]) -> Result<CsrMatrix<T>> {
        let phi_free = PenalizedProblem { phi: Arc::new(vec![T::zero(); self.phi.len()]), ..self.clone() };
        phi_free.jacobian(u)
    }

    /// `λ̂ = −(1/Vol_σ) ∮ φ/W_b dA_σ`.
    pub fn lambda_from_compatibility(&self, u: &[T]) -> Result<T> {
        self.check_len(u)?;
        let half = T::lit(0.5);
        let mut integral = T::zero();
        for e in &self.disc.edges {
            for q in &e.points {
                integral += half * q.length * self.boundary_flux(e, q, u).0;
            }
        }
        Ok(-integral / self.disc.volume)
    }

    /// Contact-angle cosine `φ/√(1 + t² + φ²)` at each boundary vertex, with
    /// `t` the centered tangential derivative.
    pub fn contact_cosines(&self, u: &[T]) -> Result<Vec<T>> {
        self.check_len(u)?;
        let b = self.domain().boundary();
        let n = b.len();
        let lengths = self.disc.boundary_edge_lengths();
        Ok((0..n)
            .map(|k| {
                let (prev, next) = ((k + n - 1) % n, (k + 1) % n);
                let t = (u[b[next]] - u[b[prev]]) / (lengths[prev] + lengths[k]);
                let phi = self.phi[k];
                phi / (T::one() + t * t + phi * phi).sqrt()
            })
            .collect())
    }

    /// `max_T |Du|_σ` over triangle centroids.
    pub fn sup_grad(&self, u: &[T]) -> T {
        self.disc.gradient_norms(u).into_iter().fold(T::zero(), T::max)
    }

    /// Lumped-mass weighted mean of a vertex field.
    pub fn weighted_mean(&self, f: &[T]) -> T {
        let m = &self.disc.lumped_mass;
        f.iter().zip(m).map(|(&v, &w)| v * w).sum::<T>() / self.disc.volume
    }
}

fn check_eps<T: Real>(eps: T) -> Result<()> {
    if !(eps > T::zero() && eps.is_finite()) {
        return Err(Error::InvalidArgument { name: "eps", reason: format!("must be positive (got {eps})") });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::generate_disk_mesh;
    use crate::geometry::{ConformalMetric, Euclidean};

    fn disk_problem(metric: Arc<dyn MetricField<f64>>, h: f64, phi: f64, eps: f64) -> PenalizedProblem<f64> {
        let dom = Arc::new(generate_disk_mesh(0.8, h, [0.0, 0.0]).unwrap());
        let nb = dom.boundary().len();
        let disc = Arc::new(Discretization::new(metric, dom).unwrap());
        PenalizedProblem::new(disc, vec![phi; nb], eps, 0.0).unwrap()
    }

    #[test]
    fn zero_data_has_zero_residual() {
        let p = disk_problem(Arc::new(Euclidean::new(2)), 0.2, 0.0, 0.1);
        let r = p.residual(&vec![0.0; p.num_vertices()]).unwrap();
        assert!(r.iter().all(|&v| v == 0.0));
        assert_eq!(p.lambda_from_compatibility(&vec![0.0; p.num_vertices()]).unwrap(), 0.0);
    }

    #[test]
    fn constant_field_residual_is_lumped_mass() {
        let p = disk_problem(Arc::new(ConformalMetric::sphere(1.0)), 0.2, 0.0, 0.1);
        let u = vec![2.5; p.num_vertices()];
        let r = p.residual(&u).unwrap();
        for (rk, mk) in r.iter().zip(p.discretization().lumped_mass()) {
            assert!((rk - 0.25 * mk).abs() < 1e-15 * (1.0 + rk.abs()));
        }
    }

    #[test]
    fn euclidean_zero_jacobian_is_laplacian_plus_mass() {
        let p = disk_problem(Arc::new(Euclidean::new(2)), 0.25, -0.3, 0.01);
        let j = p.jacobian(&vec![0.0; p.num_vertices()]).unwrap();
        // Cotangent-formula oracle for the P1 Laplacian.
        let dom = p.domain();
        let n = dom.num_vertices();
        let mut k = vec![vec![0.0; n]; n];
        for tri in dom.triangles() {
            for e in 0..3 {
                let (a, b, c) = (tri[e], tri[(e + 1) % 3], tri[(e + 2) % 3]);
                let (pa, pb, pc) = (dom.vertices()[a], dom.vertices()[b], dom.vertices()[c]);
                let u = [pa[0] - pc[0], pa[1] - pc[1]];
                let v = [pb[0] - pc[0], pb[1] - pc[1]];
                let cot = (u[0] * v[0] + u[1] * v[1]) / (u[0] * v[1] - u[1] * v[0]).abs();
                k[a][b] -= 0.5 * cot;
                k[b][a] -= 0.5 * cot;
                k[a][a] += 0.5 * cot;
                k[b][b] += 0.5 * cot;
            }
        }
        let dense = j.to_dense();
        for r in 0..n {
            k[r][r] += 0.01 * p.discretization().lumped_mass()[r];
            for c in 0..n {
                assert!((dense[r][c] - k[r][c]).abs() < 1e-12, "({r},{c}) {} vs {}", dense[r][c], k[r][c]);
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let p = disk_problem(Arc::new(ConformalMetric::perturbed_flat(0.3)), 0.2, -0.7, 0.05);
        let u: Vec<f64> = p.domain().vertices().iter().map(|x| (3.0 * x[0]).sin() + x[1] * x[1]).collect();
        let j = p.jacobian(&u).unwrap().to_dense();
        let h = 1e-6;
        for c in [0, 7, p.domain().boundary()[3]] {
            let (mut up, mut um) = (u.clone(), u.clone());
            up[c] += h;
            um[c] -= h;
            let (rp, rm) = (p.residual(&up).unwrap(), p.residual(&um).unwrap());
            for r in 0..u.len() {
                let fd = (rp[r] - rm[r]) / (2.0 * h);
                assert!((fd - j[r][c]).abs() < 1e-7, "({r},{c}) fd {fd} vs {}", j[r][c]);
            }
        }
    }

    #[test]
    fn compatibility_equals_weighted_mean_at_solution_level() {
        // Σ_k R_k = Σ m_k(υ + εu_k) + ∮ φ/W, for any u.
        let p = disk_problem(Arc::new(ConformalMetric::sphere(2.0)), 0.2, 0.4, 0.3).with_upsilon(0.1);
        let u: Vec<f64> = p.domain().vertices().iter().map(|x| x[0] - 2.0 * x[1] * x[0]).collect();
        let total: f64 = p.residual(&u).unwrap().iter().sum();
        let lhs = p.weighted_mean(&p.lambda_field(&u)) - p.lambda_from_compatibility(&u).unwrap();
        assert!((total / p.discretization().volume() - lhs).abs() < 1e-13);
    }

    #[test]
    fn bad_inputs() {
        let p = disk_problem(Arc::new(Euclidean::new(2)), 0.3, 0.0, 0.1);
        assert!(p.with_eps(0.0).is_err());
        assert!(p.residual(&[0.0]).is_err());
        assert!(DiscreteField::new(vec![f64::NAN], 1).is_err());
        let r = p.residual(&vec![f64::INFINITY; p.num_vertices()]);
        assert!(matches!(r, Err(Error::NonFiniteResidual { .. })));
    }
}
