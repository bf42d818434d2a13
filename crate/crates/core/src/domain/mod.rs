//! Triangulated chart domains: generation, validation, boundary geometry and quadrature.

mod io;

pub use io::{read_mesh, write_mesh, write_vtk, MeshFile};

use std::collections::HashMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{build_jet, MetricField};
use crate::Real;

/// Strict convexity is certified iff `kappa1 > TOL_CONVEX`.
pub const TOL_CONVEX: f64 = 1e-8;

/// Planar triangulation of a disk-like chart region.
///
/// The boundary is a single closed loop traversed counter-clockwise
/// (domain on the left), stored both as an ordered vertex list and as
/// consecutive edges.
#[derive(Clone, Debug)]
pub struct TriangulatedDomain<T> {
    vertices: Vec<[T; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<usize>,
    boundary_position: Vec<Option<usize>>,
    h_mesh: T,
}

fn signed_area<T: Real>(a: [T; 2], b: [T; 2], c: [T; 2]) -> T {
    T::lit(0.5) * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist<T: Real>(a: [T; 2], b: [T; 2]) -> T {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

impl<T: Real> TriangulatedDomain<T> {
    /// Builds a domain from raw data, orienting triangles counter-clockwise and
    /// extracting the boundary loop. Fails unless all mesh invariants hold.
    pub fn from_parts(vertices: Vec<[T; 2]>, mut triangles: Vec<[usize; 3]>) -> Result<Self> {
        let nv = vertices.len();
        if nv < 3 || triangles.is_empty() {
            return Err(Error::InvalidMesh("need at least 3 vertices and one triangle".into()));
        }
        for (t, tri) in triangles.iter_mut().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidMesh(format!("triangle {t} references a missing vertex")));
            }
            if signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]) < T::zero() {
                tri.swap(1, 2);
            }
        }
        let mut h_mesh = T::zero();
        for tri in &triangles {
            for e in 0..3 {
                h_mesh = h_mesh.max(dist(vertices[tri[e]], vertices[tri[(e + 1) % 3]]));
            }
        }
        let min_area = T::lit(1e-12) * h_mesh * h_mesh;
        for (t, tri) in triangles.iter().enumerate() {
            let a = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if !(a > min_area) {
                return Err(Error::DegenerateMesh(format!("triangle {t} has area {a:e}")));
            }
        }

        // Directed edge counts: an interior edge appears once in each direction.
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &triangles {
            for e in 0..3 {
                *directed.entry((tri[e], tri[(e + 1) % 3])).or_default() += 1;
            }
        }
        let mut next: HashMap<usize, usize> = HashMap::new();
        for (&(a, b), &count) in &directed {
            if count > 1 {
                return Err(Error::InvalidMesh(format!("edge ({a}, {b}) is shared with inconsistent orientation")));
            }
            if !directed.contains_key(&(b, a)) && next.insert(a, b).is_some() {
                return Err(Error::InvalidMesh(format!("vertex {a} starts two boundary edges")));
            }
        }
        if next.is_empty() {
            return Err(Error::InvalidMesh("mesh has no boundary".into()));
        }
        let start = *next.keys().min().expect("nonempty");
        let mut boundary = vec![start];
        let mut cur = next[&start];
        while cur != start {
            if boundary.len() > next.len() {
                return Err(Error::InvalidMesh("boundary edges do not close".into()));
            }
            boundary.push(cur);
            cur = *next.get(&cur).ok_or_else(|| Error::InvalidMesh(format!("boundary loop breaks at vertex {cur}")))?;
        }
        if boundary.len() != next.len() {
            return Err(Error::InvalidMesh("boundary consists of more than one loop".into()));
        }
        let n_edges = (directed.len() + next.len()) / 2;
        let euler = nv as i64 - n_edges as i64 + triangles.len() as i64;
        if euler != 1 {
            return Err(Error::InvalidMesh(format!("Euler characteristic is {euler}, expected 1")));
        }
        let mut used = vec![false; nv];
        triangles.iter().flatten().for_each(|&v| used[v] = true);
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(Error::InvalidMesh(format!("vertex {v} is not used by any triangle")));
        }
        let mut boundary_position = vec![None; nv];
        for (k, &v) in boundary.iter().enumerate() {
            boundary_position[v] = Some(k);
        }
        Ok(TriangulatedDomain { vertices, triangles, boundary, boundary_position, h_mesh })
    }

    pub fn vertices(&self) -> &[[T; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Boundary vertices in counter-clockwise order.
    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    /// Boundary edges `(boundary[k], boundary[k + 1])`, closing the loop.
    pub fn boundary_edges(&self) -> impl Iterator<Item = [usize; 2]> + '_ {
        let n = self.boundary.len();
        (0..n).map(move |k| [self.boundary[k], self.boundary[(k + 1) % n]])
    }

    /// Index of `v` in [`Self::boundary`], if it is a boundary vertex.
    pub fn boundary_position(&self, v: usize) -> Option<usize> {
        self.boundary_position[v]
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        (3 * self.triangles.len() + self.boundary.len()) / 2
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.num_edges() as i64 + self.triangles.len() as i64
    }

    /// Longest edge length in chart units.
    pub fn h_mesh(&self) -> T {
        self.h_mesh
    }

    pub fn triangle_points(&self, t: usize) -> [[T; 2]; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    pub fn chart_area(&self) -> T {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangle_points(t);
                signed_area(a, b, c)
            })
            .sum()
    }

    /// Area-weighted chart centroid.
    pub fn centroid(&self) -> [T; 2] {
        let three = T::lit(3.0);
        let mut acc = [T::zero(); 2];
        let mut area = T::zero();
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.triangle_points(t);
            let w = signed_area(a, b, c);
            area += w;
            for i in 0..2 {
                acc[i] += w * (a[i] + b[i] + c[i]) / three;
            }
        }
        [acc[0] / area, acc[1] / area]
    }

    /// Vertex closest to `p`; ties resolve to the smallest index.
    pub fn nearest_vertex(&self, p: [T; 2]) -> usize {
        let mut best = (0, T::infinity());
        for (i, &v) in self.vertices.iter().enumerate() {
            let d = dist(v, p);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    /// Largest chart distance between two boundary vertices.
    pub fn diameter(&self) -> T {
        let mut d = T::zero();
        for (i, &a) in self.boundary.iter().enumerate() {
            for &b in &self.boundary[i + 1..] {
                d = d.max(dist(self.vertices[a], self.vertices[b]));
            }
        }
        d
    }

    /// Chart distance from `p` to the boundary polygon, with the closest boundary point.
    pub fn distance_to_boundary(&self, p: [T; 2]) -> (T, [T; 2]) {
        let mut best = (T::infinity(), p);
        for [a, b] in self.boundary_edges() {
            let (pa, pb) = (self.vertices[a], self.vertices[b]);
            let e = [pb[0] - pa[0], pb[1] - pa[1]];
            let len2 = e[0] * e[0] + e[1] * e[1];
            let s = (((p[0] - pa[0]) * e[0] + (p[1] - pa[1]) * e[1]) / len2).max(T::zero()).min(T::one());
            let q = [pa[0] + s * e[0], pa[1] + s * e[1]];
            let d = dist(p, q);
            if d < best.0 {
                best = (d, q);
            }
        }
        best
    }

    /// Largest distance from a vertex to the boundary.
    pub fn inradius(&self) -> T {
        self.vertices.iter().map(|&v| self.distance_to_boundary(v).0).fold(T::zero(), T::max)
    }

    /// Tangent `x'(0)` and acceleration `x''(0)` at boundary position `k` from
    /// the parabola through the previous, current and next boundary vertices,
    /// parametrized by chord length.
    fn boundary_jet(&self, k: usize) -> ([T; 2], [T; 2]) {
        let n = self.boundary.len();
        let p0 = self.vertices[self.boundary[(k + n - 1) % n]];
        let p1 = self.vertices[self.boundary[k]];
        let p2 = self.vertices[self.boundary[(k + 1) % n]];
        let (d1, d2) = (dist(p0, p1), dist(p1, p2));
        let two = T::lit(2.0);
        let mut tangent = [T::zero(); 2];
        let mut accel = [T::zero(); 2];
        for i in 0..2 {
            tangent[i] = -d2 / (d1 * (d1 + d2)) * p0[i] + (d2 - d1) / (d1 * d2) * p1[i] + d1 / (d2 * (d1 + d2)) * p2[i];
            accel[i] = two * (p0[i] / (d1 * (d1 + d2)) - p1[i] / (d1 * d2) + p2[i] / (d2 * (d1 + d2)));
        }
        (tangent, accel)
    }

    /// Inward σ-unit normal at every boundary vertex, in boundary order.
    pub fn boundary_normals<M: MetricField<T> + ?Sized>(&self, metric: &M) -> Result<Vec<BoundaryNormal<T>>> {
        check_planar(metric)?;
        (0..self.boundary.len())
            .map(|k| {
                let x = self.vertices[self.boundary[k]];
                let (tangent, _) = self.boundary_jet(k);
                let jet = build_jet(metric, &x, false)?;
                Ok(BoundaryNormal::from_tangent(&jet.sigma_inv, tangent))
            })
            .collect()
    }
}

fn check_planar<T: Real, M: MetricField<T> + ?Sized>(metric: &M) -> Result<()> {
    if metric.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: metric.dim() });
    }
    Ok(())
}

/// Inward unit normal at a boundary point: covector `ξ` (annihilating the
/// tangent) and vector `ν = σ⁻¹ξ`, normalized so that `⟨ν, ν⟩_σ = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryNormal<T> {
    pub tangent: [T; 2],
    pub covector: [T; 2],
    pub vector: [T; 2],
}

impl<T: Real> BoundaryNormal<T> {
    fn from_tangent(sigma_inv: &crate::linalg::Matrix<T>, tangent: [T; 2]) -> Self {
        let xi = [-tangent[1], tangent[0]];
        let norm = sigma_inv.bilinear(&xi, &xi).sqrt();
        let covector = [xi[0] / norm, xi[1] / norm];
        let v = sigma_inv.mul_vec(&covector);
        BoundaryNormal { tangent, covector, vector: [v[0], v[1]] }
    }
}

/// Boundary geodesic curvature with respect to σ and the inward normal.
#[derive(Clone, Debug)]
pub struct ConvexityReport<T> {
    /// Smallest boundary curvature.
    pub kappa1: T,
    /// Curvature at each boundary vertex, in boundary order.
    pub curvature: Vec<T>,
}

impl<T: Real> ConvexityReport<T> {
    pub fn is_strictly_convex(&self) -> bool {
        self.kappa1 > T::lit(TOL_CONVEX)
    }

    pub fn certify(&self) -> Result<()> {
        if self.is_strictly_convex() {
            Ok(())
        } else {
            Err(Error::NotStrictlyConvex { kappa1: self.kappa1.as_f64() })
        }
    }
}

/// `κ = ⟨x'' + Γ(x', x'), ν⟩_σ / |x'|²_σ` from the local boundary parabola fit.
pub fn boundary_convexity<T: Real, M: MetricField<T> + ?Sized>(
    dom: &TriangulatedDomain<T>,
    metric: &M,
) -> Result<ConvexityReport<T>> {
    check_planar(metric)?;
    let mut curvature = Vec::with_capacity(dom.boundary.len());
    for k in 0..dom.boundary.len() {
        let x = dom.vertices[dom.boundary[k]];
        let (t, a) = dom.boundary_jet(k);
        let jet = build_jet(metric, &x, false)?;
        let nu = BoundaryNormal::from_tangent(&jet.sigma_inv, t);
        let mut acc = a;
        for (l, acc_l) in acc.iter_mut().enumerate() {
            for i in 0..2 {
                for j in 0..2 {
                    *acc_l += jet.christoffel[(l, i, j)] * t[i] * t[j];
                }
            }
        }
        let speed2 = jet.sigma.bilinear(&t, &t);
        curvature.push((acc[0] * nu.covector[0] + acc[1] * nu.covector[1]) / speed2);
    }
    let kappa1 = curvature.iter().copied().fold(T::infinity(), T::min);
    Ok(ConvexityReport { kappa1, curvature })
}

/// Volume quadrature rule on triangles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VolumeRule {
    /// One point at the centroid.
    Centroid,
    /// Three edge midpoints, exact for quadratic densities.
    EdgeMidpoints,
}

/// σ-measures of triangles and boundary edges.
#[derive(Clone, Debug)]
pub struct Measures<T> {
    /// `∫_T √det σ`, per triangle.
    pub triangle: Vec<T>,
    /// σ-length of each boundary edge, in boundary order (two-point Gauss).
    pub boundary_edge: Vec<T>,
    pub volume: T,
    pub boundary_length: T,
}

/// Two-point Gauss nodes on `[0, 1]` (equal weights ½).
pub fn gauss2<T: Real>() -> [T; 2] {
    let d = T::lit(0.5) / T::lit(3.0).sqrt();
    [T::lit(0.5) - d, T::lit(0.5) + d]
}

pub fn measures<T: Real, M: MetricField<T> + ?Sized>(
    dom: &TriangulatedDomain<T>,
    metric: &M,
    rule: VolumeRule,
) -> Result<Measures<T>> {
    check_planar(metric)?;
    let third = T::one() / T::lit(3.0);
    let half = T::lit(0.5);
    let mut triangle = Vec::with_capacity(dom.triangles.len());
    for t in 0..dom.triangles.len() {
        let [a, b, c] = dom.triangle_points(t);
        let area = signed_area(a, b, c);
        let density = |p: [T; 2]| -> Result<T> { Ok(build_jet(metric, &p, false)?.sqrt_det) };
        let w = match rule {
            VolumeRule::Centroid => density([(a[0] + b[0] + c[0]) * third, (a[1] + b[1] + c[1]) * third])?,
            VolumeRule::EdgeMidpoints => {
                let mid = |p: [T; 2], q: [T; 2]| [(p[0] + q[0]) * half, (p[1] + q[1]) * half];
                (density(mid(a, b))? + density(mid(b, c))? + density(mid(c, a))?) * third
            }
        };
        triangle.push(w * area);
    }
    let g = gauss2::<T>();
    let mut boundary_edge = Vec::with_capacity(dom.boundary.len());
    for [a, b] in dom.boundary_edges() {
        let (pa, pb) = (dom.vertices[a], dom.vertices[b]);
        let e = [pb[0] - pa[0], pb[1] - pa[1]];
        let mut len = T::zero();
        for &s in &g {
            let x = [pa[0] + s * e[0], pa[1] + s * e[1]];
            len += half * metric.sigma(&x).bilinear(&e, &e).sqrt();
        }
        boundary_edge.push(len);
    }
    let volume = triangle.iter().copied().sum();
    let boundary_length = boundary_edge.iter().copied().sum();
    Ok(Measures { triangle, boundary_edge, volume, boundary_length })
}

/// Number of rings for a target edge length.
fn ring_count<T: Real>(extent: T, h: T) -> usize {
    ((extent / h).as_f64() - 1e-9).ceil().max(1.0) as usize
}

/// Concentric-ring triangulation of the unit disk with `k` rings; ring `j`
/// carries `6j` equally spaced vertices. Vertex 0 is the center and the
/// last ring is the boundary.
fn unit_disk_rings<T: Real>(k: usize) -> (Vec<[T; 2]>, Vec<[usize; 3]>) {
    let mut vertices = vec![[T::zero(); 2]];
    let mut ring_start = vec![0usize];
    for ring in 1..=k {
        ring_start.push(vertices.len());
        let r = T::lit(ring as f64 / k as f64);
        let m = 6 * ring;
        for j in 0..m {
            let theta = T::TAU() * T::lit(j as f64) / T::lit(m as f64);
            vertices.push([r * theta.cos(), r * theta.sin()]);
        }
    }
    let mut triangles = Vec::with_capacity(6 * k * k);
    for j in 0..6 {
        triangles.push([0, 1 + j, 1 + (j + 1) % 6]);
    }
    for ring in 1..k {
        let (n_in, n_out) = (6 * ring, 6 * (ring + 1));
        let inner = |i: usize| ring_start[ring] + i % n_in;
        let outer = |j: usize| ring_start[ring + 1] + j % n_out;
        let (mut i, mut j) = (0, 0);
        while i < n_in || j < n_out {
            // Advance along whichever ring has the smaller next angle.
            let advance_inner = j == n_out || (i < n_in && (i + 1) * n_out <= (j + 1) * n_in);
            if advance_inner {
                triangles.push([inner(i), outer(j), inner(i + 1)]);
                i += 1;
            } else {
                triangles.push([inner(i), outer(j), outer(j + 1)]);
                j += 1;
            }
        }
    }
    (vertices, triangles)
}

fn check_target(name: &'static str, extent: f64, h: f64) -> Result<()> {
    if !(extent > 0.0) || !extent.is_finite() {
        return Err(Error::InvalidArgument { name, reason: format!("must be positive (got {extent})") });
    }
    if !(h > 0.0 && h < extent) {
        return Err(Error::InvalidArgument { name: "h", reason: format!("must lie in (0, {extent}) (got {h})") });
    }
    Ok(())
}

/// Disk of the given chart radius and center.
pub fn generate_disk_mesh<T: Real>(radius: T, h: T, center: [T; 2]) -> Result<TriangulatedDomain<T>> {
    check_target("radius", radius.as_f64(), h.as_f64())?;
    let (v, t) = unit_disk_rings::<T>(ring_count(radius, h));
    let v = v.into_iter().map(|p| [center[0] + radius * p[0], center[1] + radius * p[1]]).collect();
    TriangulatedDomain::from_parts(v, t)
}

/// Axis-aligned ellipse `(x/a)² + (y/b)² ≤ 1`.
pub fn generate_ellipse_mesh<T: Real>(a: T, b: T, h: T) -> Result<TriangulatedDomain<T>> {
    check_target("b", b.as_f64(), h.as_f64())?;
    check_target("a", a.as_f64(), h.as_f64())?;
    let (v, t) = unit_disk_rings::<T>(ring_count(a.max(b), h));
    let v = v.into_iter().map(|p| [a * p[0], b * p[1]]).collect();
    TriangulatedDomain::from_parts(v, t)
}

/// Star-shaped region `r ≤ R(1 + A cos(mθ))`; non-convex once `A(m² − 1) > 1`.
pub fn generate_star_mesh<T: Real>(radius: T, amplitude: T, lobes: usize, h: T) -> Result<TriangulatedDomain<T>> {
    check_target("radius", radius.as_f64(), h.as_f64())?;
    if !(amplitude.as_f64() >= 0.0 && amplitude.as_f64() < 1.0) {
        return Err(Error::InvalidArgument {
            name: "amplitude",
            reason: format!("must lie in [0, 1) (got {amplitude})"),
        });
    }
    let (v, t) = unit_disk_rings::<T>(ring_count(radius * (T::one() + amplitude), h));
    let m = T::lit(lobes as f64);
    let v = v
        .into_iter()
        .map(|p| {
            let s = radius * (T::one() + amplitude * (m * p[1].atan2(p[0])).cos());
            [s * p[0], s * p[1]]
        })
        .collect();
    TriangulatedDomain::from_parts(v, t)
}

fn zero_center() -> [f64; 2] {
    [0.0, 0.0]
}
fn default_lobes() -> usize {
    5
}

/// Domain description as it appears in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainSpec {
    Disk {
        radius: f64,
        #[serde(default = "zero_center")]
        center: [f64; 2],
        h: f64,
    },
    Ellipse {
        a: f64,
        b: f64,
        h: f64,
    },
    Star {
        radius: f64,
        amplitude: f64,
        #[serde(default = "default_lobes")]
        lobes: usize,
        h: f64,
    },
    MeshFile {
        path: PathBuf,
    },
}

impl DomainSpec {
    pub fn build<T: Real>(&self) -> Result<TriangulatedDomain<T>> {
        match self {
            DomainSpec::Disk { radius, center, h } => {
                generate_disk_mesh(T::lit(*radius), T::lit(*h), [T::lit(center[0]), T::lit(center[1])])
            }
            DomainSpec::Ellipse { a, b, h } => generate_ellipse_mesh(T::lit(*a), T::lit(*b), T::lit(*h)),
            DomainSpec::Star { radius, amplitude, lobes, h } => {
                generate_star_mesh(T::lit(*radius), T::lit(*amplitude), *lobes, T::lit(*h))
            }
            DomainSpec::MeshFile { path } => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                Ok(read_mesh(&text)?.domain)
            }
        }
    }

    /// Target edge length, if the spec carries one.
    pub fn h(&self) -> Option<f64> {
        match self {
            DomainSpec::Disk { h, .. } | DomainSpec::Ellipse { h, .. } | DomainSpec::Star { h, .. } => Some(*h),
            DomainSpec::MeshFile { .. } => None,
        }
    }

    pub fn set_h(&mut self, value: f64) {
        match self {
            DomainSpec::Disk { h, .. } | DomainSpec::Ellipse { h, .. } | DomainSpec::Star { h, .. } => *h = value,
            DomainSpec::MeshFile { .. } => {}
        }
    }
}
