//! Triangulation and P1 Galerkin solves for the harmonic part of φ.
//!
//! Normal derivatives follow the geometry convention: `g = ∂φ/∂n` with n the
//! inward (left) normal. For ∇²u = ρ the weak form is then
//! `∫∇u·∇v = −∮ g v ds − ∫ ρ v`, and solvability requires `∮g ds + ∫ρ = 0`.

use alloc::sync::Arc;
use core::f64::consts::TAU;
use alloc::vec::Vec;

use log::debug;
use spade::{AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};

use crate::geometry::{ear_clip, BoundaryPoint, DomainSpec, Point};
use crate::linalg::{rcm, Csr, SkylineLdl};
#[allow(unused_imports)]
use crate::math::{subtended, Float};
use crate::quadrature::{GaussLegendre, TRI7};

/// Ratio between the largest triangle circumradius and the target edge length
/// that [`triangulate`] guarantees (checked after meshing).
pub const CIRCUMRADIUS_FACTOR: f64 = 1.5;
/// Default compatibility tolerance for Neumann data.
pub const COMPATIBILITY_TOL: f64 = 1e-6;
/// Relative residual required of every discrete solve.
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeshError {
    #[error("mesh size h = {h} must satisfy 0 < h < diameter {diameter}")]
    BadMeshSize { h: f64, diameter: f64 },
    #[error("triangulation failed: {0}")]
    Triangulation(&'static str),
    #[error("degenerate domain: {0}")]
    Degenerate(&'static str),
    #[error("triangle {0} has non-positive area")]
    InvertedTriangle(usize),
    #[error("index {0} out of range")]
    BadIndex(usize),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("incompatible Neumann data: ∮g + ∫ρ = {defect:e}")]
    Incompatible { defect: f64 },
    #[error("singular system: {0}")]
    Singular(&'static str),
    #[error("discrete residual {0:e} above tolerance")]
    Residual(f64),
    #[error("non-finite boundary data at vertex {0}")]
    NonFinite(usize),
}

/// Boundary mesh edge, oriented with the domain on its left.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryEdge {
    pub v: [usize; 2],
    pub loop_index: usize,
    pub segment: usize,
    pub s0: f64,
    pub s1: f64,
}

/// Conforming triangle mesh with tagged boundary edges.
#[derive(Clone, Debug)]
pub struct TriMesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    /// Boundary address of each boundary vertex (start of its outgoing edge).
    pub boundary_tags: Vec<Option<BoundaryPoint>>,
    locator: Locator,
}

impl TriMesh {
    /// Assembles a mesh from raw parts, checking indices and orientation.
    pub fn from_parts(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<BoundaryEdge>,
    ) -> Result<Self, MeshError> {
        let n = vertices.len();
        for (ti, t) in triangles.iter().enumerate() {
            for &v in t {
                if v >= n {
                    return Err(MeshError::BadIndex(v));
                }
            }
            let a = (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]);
            if !(a > 0.0) {
                return Err(MeshError::InvertedTriangle(ti));
            }
        }
        let mut boundary_tags = alloc::vec![None; n];
        for e in &boundary_edges {
            for &v in &e.v {
                if v >= n {
                    return Err(MeshError::BadIndex(v));
                }
            }
            boundary_tags[e.v[0]] = Some(BoundaryPoint {
                loop_index: e.loop_index,
                segment: e.segment,
                s: e.s0,
                position: vertices[e.v[0]],
            });
        }
        let locator = Locator::new(&vertices, &triangles);
        Ok(TriMesh { vertices, triangles, boundary_edges, boundary_tags, locator })
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        0.5 * (self.vertices[b] - self.vertices[a]).cross(self.vertices[c] - self.vertices[a])
    }

    pub fn circumradius(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
        a.dist(b) * b.dist(c) * c.dist(a) / (4.0 * self.area(t))
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary_tags[v].is_some()
    }

    /// Triangle containing `p` and barycentric coordinates. Points slightly
    /// outside the mesh (between a chord and its arc) get the nearest triangle
    /// with extrapolated coordinates.
    pub fn locate(&self, p: Point) -> Option<(usize, [f64; 3])> {
        self.locator.locate(p, &self.vertices, &self.triangles)
    }

    /// Constant gradient of the linear interpolant of `values` on triangle `t`.
    pub fn gradient_on(&self, t: usize, values: &[f64]) -> Point {
        let [i, j, k] = self.triangles[t];
        let (pi, pj, pk) = (self.vertices[i], self.vertices[j], self.vertices[k]);
        let a2 = 2.0 * self.area(t);
        let b = [pj.y - pk.y, pk.y - pi.y, pi.y - pj.y];
        let c = [pk.x - pj.x, pi.x - pk.x, pj.x - pi.x];
        let u = [values[i], values[j], values[k]];
        Point::new(
            (b[0] * u[0] + b[1] * u[1] + b[2] * u[2]) / a2,
            (c[0] * u[0] + c[1] * u[1] + c[2] * u[2]) / a2,
        )
    }

    /// Distance from `p` to the nearest edge of the triangle containing it.
    pub fn edge_clearance(&self, p: Point) -> f64 {
        match self.locate(p) {
            Some((t, _)) => {
                let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
                [(a, b), (b, c), (c, a)]
                    .iter()
                    .map(|&(u, v)| {
                        let d = v - u;
                        let t = ((p - u).dot(d) / d.norm2()).clamp(0.0, 1.0);
                        p.dist(u + d * t)
                    })
                    .fold(f64::INFINITY, f64::min)
            }
            None => 0.0,
        }
    }

    /// Consistent lumped-mass vector c = M·1 (area/3 per incident triangle).
    pub fn mass_lumps(&self) -> Vec<f64> {
        let mut c = alloc::vec![0.0; self.vertices.len()];
        for t in 0..self.triangles.len() {
            let a = self.area(t) / 3.0;
            for &v in &self.triangles[t] {
                c[v] += a;
            }
        }
        c
    }

    /// Stiffness matrix of the P1 Laplacian.
    pub(crate) fn stiffness(&self) -> Csr {
        let mut trip = Vec::with_capacity(9 * self.triangles.len());
        for t in 0..self.triangles.len() {
            let ke = self.element_stiffness(t);
            let tri = self.triangles[t];
            for a in 0..3 {
                for b in 0..3 {
                    trip.push((tri[a], tri[b], ke[a][b]));
                }
            }
        }
        Csr::from_triplets(self.vertices.len(), trip)
    }

    fn element_stiffness(&self, t: usize) -> [[f64; 3]; 3] {
        let [i, j, k] = self.triangles[t];
        let (pi, pj, pk) = (self.vertices[i], self.vertices[j], self.vertices[k]);
        let b = [pj.y - pk.y, pk.y - pi.y, pi.y - pj.y];
        let c = [pk.x - pj.x, pi.x - pk.x, pj.x - pi.x];
        let a4 = 4.0 * self.area(t);
        let mut ke = [[0.0; 3]; 3];
        for a in 0..3 {
            for bb in 0..3 {
                ke[a][bb] = (b[a] * b[bb] + c[a] * c[bb]) / a4;
            }
        }
        ke
    }

    /// K·u computed element by element.
    pub fn apply_stiffness(&self, u: &[f64]) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.vertices.len()];
        for t in 0..self.triangles.len() {
            let ke = self.element_stiffness(t);
            let tri = self.triangles[t];
            for a in 0..3 {
                for b in 0..3 {
                    out[tri[a]] += ke[a][b] * u[tri[b]];
                }
            }
        }
        out
    }

    /// Boundary edges incident to each vertex: (incoming, outgoing).
    pub fn boundary_neighbours(&self) -> Vec<(Option<usize>, Option<usize>)> {
        let mut out = alloc::vec![(None, None); self.vertices.len()];
        for (ei, e) in self.boundary_edges.iter().enumerate() {
            out[e.v[0]].1 = Some(ei);
            out[e.v[1]].0 = Some(ei);
        }
        out
    }
}

/// Uniform bucket grid over triangle bounding boxes.
#[derive(Clone, Debug)]
struct Locator {
    origin: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

impl Locator {
    fn new(vertices: &[Point], triangles: &[[usize; 3]]) -> Self {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in vertices {
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        if vertices.is_empty() {
            lo = Point::ZERO;
            hi = Point::new(1.0, 1.0);
        }
        let ext = (hi - lo).x.max((hi - lo).y).max(1e-300);
        let target = (triangles.len() as f64).sqrt().max(1.0);
        let cell = ext / target;
        let nx = (((hi.x - lo.x) / cell).floor() as usize + 1).max(1);
        let ny = (((hi.y - lo.y) / cell).floor() as usize + 1).max(1);
        let mut buckets = alloc::vec![Vec::new(); nx * ny];
        for (ti, t) in triangles.iter().enumerate() {
            let ps = t.map(|i| vertices[i]);
            let x0 = ps.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
            let x1 = ps.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
            let y0 = ps.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
            let y1 = ps.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
            let (i0, j0) = (((x0 - lo.x) / cell) as usize, ((y0 - lo.y) / cell) as usize);
            let (i1, j1) = ((((x1 - lo.x) / cell) as usize).min(nx - 1), (((y1 - lo.y) / cell) as usize).min(ny - 1));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * nx + i].push(ti as u32);
                }
            }
        }
        Locator { origin: lo, cell, nx, ny, buckets }
    }

    fn locate(&self, p: Point, v: &[Point], tris: &[[usize; 3]]) -> Option<(usize, [f64; 3])> {
        if tris.is_empty() || !p.is_finite() {
            return None;
        }
        let fx = (p.x - self.origin.x) / self.cell;
        let fy = (p.y - self.origin.y) / self.cell;
        let ci = (fx.floor().max(0.0) as usize).min(self.nx - 1) as isize;
        let cj = (fy.floor().max(0.0) as usize).min(self.ny - 1) as isize;
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        let max_ring = self.nx.max(self.ny) as isize;
        for ring in 0..=max_ring {
            for j in (cj - ring)..=(cj + ring) {
                for i in (ci - ring)..=(ci + ring) {
                    if (j - cj).abs() != ring && (i - ci).abs() != ring {
                        continue;
                    }
                    if i < 0 || j < 0 || i >= self.nx as isize || j >= self.ny as isize {
                        continue;
                    }
                    for &t in &self.buckets[j as usize * self.nx + i as usize] {
                        let t = t as usize;
                        let bc = barycentric(p, tris[t].map(|k| v[k]));
                        let m = bc[0].min(bc[1]).min(bc[2]);
                        if m >= -1e-12 {
                            return Some((t, bc));
                        }
                        let d = distance_to_triangle(p, tris[t].map(|k| v[k]));
                        if best.as_ref().is_none_or(|b| d < b.2) {
                            best = Some((t, bc, d));
                        }
                    }
                }
            }
            // Everything within `ring` cells has been examined.
            if let Some(b) = &best {
                if b.2 < ring as f64 * self.cell {
                    break;
                }
            }
        }
        best.map(|(t, bc, _)| (t, bc))
    }
}

fn barycentric(p: Point, [a, b, c]: [Point; 3]) -> [f64; 3] {
    let det = (b - a).cross(c - a);
    let l1 = (b - p).cross(c - p) / det;
    let l2 = (c - p).cross(a - p) / det;
    [l1, l2, 1.0 - l1 - l2]
}

fn distance_to_triangle(p: Point, [a, b, c]: [Point; 3]) -> f64 {
    [(a, b), (b, c), (c, a)]
        .iter()
        .map(|&(u, v)| {
            let d = v - u;
            let t = ((p - u).dot(d) / d.norm2()).clamp(0.0, 1.0);
            p.dist(u + d * t)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Refinement-based constrained Delaunay triangulation.
///
/// Boundary curves are sampled at spacing ≤ h (so arc chords deviate less than
/// h²/(8R)); boundary edges are kept unsplit. Interior triangles are refined to
/// area ≤ 0.6·h² and minimum angle 25°, which keeps circumradii below
/// [`CIRCUMRADIUS_FACTOR`]·h.
pub fn triangulate(domain: &DomainSpec, h: f64) -> Result<TriMesh, MeshError> {
    let diameter = domain.diameter();
    if !(h > 0.0 && h < diameter) {
        return Err(MeshError::BadMeshSize { h, diameter });
    }
    let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> = ConstrainedDelaunayTriangulation::new();
    // (handle index, loop, segment, s) for each boundary sample in traversal order.
    struct Sample {
        handle: spade::handles::FixedVertexHandle,
        seg: usize,
        s: f64,
    }
    let mut loops_samples: Vec<Vec<Sample>> = Vec::new();
    for l in &domain.loops {
        let mut samples: Vec<Sample> = Vec::new();
        for (si, seg) in l.segments.iter().enumerate() {
            let pts = seg.sample(h);
            // The end point is the next segment's start (or the loop start).
            for &(s, p) in &pts[..pts.len() - 1] {
                let handle = cdt
                    .insert(Point2::new(p.x, p.y))
                    .map_err(|_| MeshError::Triangulation("vertex insertion failed"))?;
                samples.push(Sample { handle, seg: si, s });
            }
        }
        if samples.len() < 3 {
            return Err(MeshError::Degenerate("loop sampled with fewer than three points"));
        }
        loops_samples.push(samples);
    }
    for samples in &loops_samples {
        let n = samples.len();
        for i in 0..n {
            let (a, b) = (samples[i].handle, samples[(i + 1) % n].handle);
            if a == b {
                return Err(MeshError::Degenerate("coincident boundary samples"));
            }
            if cdt.try_add_constraint(a, b).len() != 1 {
                return Err(MeshError::Triangulation("boundary constraints intersect"));
            }
        }
    }
    let max_area = 0.6 * h * h;
    let expected = (domain.area().abs() / (0.25 * max_area)) as usize + 1000;
    let params = RefinementParameters::<f64>::new()
        .exclude_outer_faces(true)
        .keep_constraint_edges()
        .with_max_allowed_area(max_area)
        .with_angle_limit(AngleLimit::from_deg(25.0))
        .with_max_additional_vertices(expected.saturating_mul(4));
    let result = cdt.refine(params);
    if !result.refinement_complete {
        debug!("refinement stopped at the vertex budget");
    }
    let mut excluded = alloc::vec![false; cdt.num_all_faces()];
    for f in &result.excluded_faces {
        excluded[f.index()] = true;
    }
    let vertices: Vec<Point> = cdt.vertices().map(|v| Point::new(v.position().x, v.position().y)).collect();
    let mut triangles = Vec::new();
    for f in cdt.inner_faces() {
        if excluded[f.fix().index()] {
            continue;
        }
        let vs = f.vertices().map(|v| v.fix().index());
        triangles.push(vs);
    }
    let mut boundary_edges = Vec::new();
    for (li, samples) in loops_samples.iter().enumerate() {
        let n = samples.len();
        for i in 0..n {
            let a = &samples[i];
            let b = &samples[(i + 1) % n];
            let s1 = if b.seg == a.seg && b.s > a.s {
                b.s
            } else {
                domain.segment(li, a.seg).length()
            };
            boundary_edges.push(BoundaryEdge {
                v: [a.handle.index(), b.handle.index()],
                loop_index: li,
                segment: a.seg,
                s0: a.s,
                s1,
            });
        }
    }
    let mesh = TriMesh::from_parts(vertices, triangles, boundary_edges)?;
    let unused = mesh.vertices.len() - {
        let mut used = alloc::vec![false; mesh.vertices.len()];
        for t in &mesh.triangles {
            for &v in t {
                used[v] = true;
            }
        }
        used.iter().filter(|u| **u).count()
    };
    if unused > 0 {
        return Err(MeshError::Triangulation("vertices outside the domain were created"));
    }
    debug!("mesh: {} vertices, {} triangles", mesh.vertices.len(), mesh.triangles.len());
    Ok(mesh)
}

/// One scalar per mesh vertex, linear on each triangle.
#[derive(Clone, Debug)]
pub struct NodalField {
    pub mesh: Arc<TriMesh>,
    pub values: Vec<f64>,
    /// Discrete harmonic conjugate ψ with ∇ψ ≈ R₉₀∇u, up to the periods.
    pub conjugate: Option<Vec<f64>>,
    /// (c, a) pairs, one per hole with net flux: the full conjugate is
    /// ψ + Σ a·arg(r − c) with c inside the hole.
    pub periods: Vec<(Point, f64)>,
}

impl NodalField {
    pub fn new(mesh: Arc<TriMesh>, values: Vec<f64>) -> Self {
        assert_eq!(mesh.vertices.len(), values.len(), "one value per vertex");
        NodalField { mesh, values, conjugate: None, periods: Vec::new() }
    }

    /// Linear interpolation (extrapolation just outside chord boundaries).
    pub fn value(&self, p: Point) -> Option<f64> {
        let (t, bc) = self.mesh.locate(p)?;
        let tri = self.mesh.triangles[t];
        Some(bc[0] * self.values[tri[0]] + bc[1] * self.values[tri[1]] + bc[2] * self.values[tri[2]])
    }

    pub fn gradient(&self, p: Point) -> Option<Point> {
        let (t, _) = self.mesh.locate(p)?;
        Some(self.mesh.gradient_on(t, &self.values))
    }

    pub fn conjugate_value(&self, p: Point) -> Option<f64> {
        let psi = self.conjugate.as_ref()?;
        let (t, bc) = self.mesh.locate(p)?;
        let tri = self.mesh.triangles[t];
        Some(bc[0] * psi[tri[0]] + bc[1] * psi[tri[1]] + bc[2] * psi[tri[2]])
    }

    pub fn max_abs_diff(&self, other: impl Fn(Point) -> f64) -> f64 {
        self.mesh.vertices.iter().zip(&self.values).map(|(p, u)| (u - other(*p)).abs()).fold(0.0, f64::max)
    }

    /// Area-weighted mean value.
    pub fn mean(&self) -> f64 {
        let c = self.mesh.mass_lumps();
        let tot: f64 = c.iter().sum();
        c.iter().zip(&self.values).map(|(w, u)| w * u).sum::<f64>() / tot
    }
}

/// Boundary function of a boundary address.
pub type BoundaryFn<'a> = &'a dyn Fn(BoundaryPoint) -> f64;
/// Interior source density.
pub type SourceFn<'a> = &'a dyn Fn(Point) -> f64;

const EDGE_GAUSS: usize = 3;

/// Reduced factorisation of K with a set of fixed vertices removed.
struct Reduced {
    order: Vec<usize>,
    ldl: SkylineLdl,
}

impl Reduced {
    fn new(k: &Csr, fixed: &[bool]) -> Result<Self, SolveError> {
        let keep: Vec<bool> = fixed.iter().map(|f| !f).collect();
        let order = rcm(k, &keep);
        let ldl = SkylineLdl::factor(k, &order).map_err(|_| SolveError::Singular("stiffness factorisation"))?;
        Ok(Reduced { order, ldl })
    }

    /// Solves K_II u_I = rhs_I in place on the full-length vector `u`.
    fn solve(&self, rhs: &[f64], u: &mut [f64]) {
        let mut x: Vec<f64> = self.order.iter().map(|&o| rhs[o]).collect();
        self.ldl.solve_in_place(&mut x);
        for (new, &old) in self.order.iter().enumerate() {
            u[old] = x[new];
        }
    }
}

/// Pre-factorised solver for repeated Neumann and Dirichlet solves on one mesh.
pub struct BackgroundSolver {
    mesh: Arc<TriMesh>,
    k: Csr,
    lumps: Vec<f64>,
    pinned: usize,
    neumann: Reduced,
    dirichlet: Option<Reduced>,
    gauss: GaussLegendre,
    pub compatibility_tol: f64,
}

impl BackgroundSolver {
    pub fn new(mesh: Arc<TriMesh>) -> Result<Self, SolveError> {
        let n = mesh.vertices.len();
        if n < 3 || mesh.triangles.is_empty() {
            return Err(SolveError::Singular("empty mesh"));
        }
        let k = mesh.stiffness();
        let lumps = mesh.mass_lumps();
        // Pin an interior vertex when possible; any vertex works.
        let pinned = (0..n).find(|&v| !mesh.is_boundary(v)).unwrap_or(0);
        let mut fixed = alloc::vec![false; n];
        fixed[pinned] = true;
        let neumann = Reduced::new(&k, &fixed)?;
        let bfixed: Vec<bool> = (0..n).map(|v| mesh.is_boundary(v)).collect();
        let dirichlet = if bfixed.iter().all(|b| *b) { None } else { Some(Reduced::new(&k, &bfixed)?) };
        Ok(BackgroundSolver {
            mesh,
            k,
            lumps,
            pinned,
            neumann,
            dirichlet,
            gauss: GaussLegendre::new(EDGE_GAUSS),
            compatibility_tol: COMPATIBILITY_TOL,
        })
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    /// ∫_e g·v ds for both end vertices of every boundary edge, in true arclength.
    /// Positions come from `domain` when given, else from the edge chord.
    fn edge_loads(&self, g: BoundaryFn<'_>, domain: Option<&DomainSpec>) -> Result<Vec<(f64, f64)>, SolveError> {
        let mut out = Vec::with_capacity(self.mesh.boundary_edges.len());
        for e in &self.mesh.boundary_edges {
            let ds = e.s1 - e.s0;
            let (p0, p1) = (self.mesh.vertices[e.v[0]], self.mesh.vertices[e.v[1]]);
            let mut l0 = 0.0;
            let mut l1 = 0.0;
            for (t, w) in self.gauss.mapped(0.0, 1.0) {
                let s = e.s0 + t * ds;
                let position = match domain {
                    Some(d) => d.segment(e.loop_index, e.segment).point_at(s),
                    None => p0.lerp(p1, t),
                };
                let v = g(BoundaryPoint { loop_index: e.loop_index, segment: e.segment, s, position });
                if !v.is_finite() {
                    return Err(SolveError::NonFinite(e.v[0]));
                }
                l0 += w * (1.0 - t) * v * ds;
                l1 += w * t * v * ds;
            }
            out.push((l0, l1));
        }
        Ok(out)
    }

    /// Neumann solve with boundary positions interpolated along edge chords.
    pub fn solve_neumann(&self, g: BoundaryFn<'_>, rhs: Option<SourceFn<'_>>) -> Result<NodalField, SolveError> {
        self.neumann_impl(g, rhs, None)
    }

    /// Neumann solve with boundary positions taken from the exact domain curves.
    pub fn solve_neumann_on(
        &self,
        domain: &DomainSpec,
        g: BoundaryFn<'_>,
        rhs: Option<SourceFn<'_>>,
    ) -> Result<NodalField, SolveError> {
        self.neumann_impl(g, rhs, Some(domain))
    }

    fn neumann_impl(
        &self,
        g: BoundaryFn<'_>,
        rhs: Option<SourceFn<'_>>,
        domain: Option<&DomainSpec>,
    ) -> Result<NodalField, SolveError> {
        let n = self.mesh.vertices.len();
        let loads = self.edge_loads(g, domain)?;
        let mut f = alloc::vec![0.0; n];
        let mut boundary_total = 0.0;
        for (e, (l0, l1)) in self.mesh.boundary_edges.iter().zip(&loads) {
            f[e.v[0]] -= l0;
            f[e.v[1]] -= l1;
            boundary_total += l0 + l1;
        }
        let mut source_total = 0.0;
        if let Some(rho) = rhs {
            for t in 0..self.mesh.triangles.len() {
                let tri = self.mesh.triangles[t];
                let ps = tri.map(|i| self.mesh.vertices[i]);
                let a = self.mesh.area(t);
                for (b, w) in TRI7 {
                    let p = ps[0] * b[0] + ps[1] * b[1] + ps[2] * b[2];
                    let r = rho(p) * w * a;
                    source_total += r;
                    for k in 0..3 {
                        f[tri[k]] -= r * b[k];
                    }
                }
            }
        }
        let defect = boundary_total + source_total;
        if !(defect.abs() <= self.compatibility_tol) {
            return Err(SolveError::Incompatible { defect });
        }
        // Remove the compatible part's round-off: equivalent to the zero-mean
        // Lagrange multiplier system.
        let ctot: f64 = self.lumps.iter().sum();
        let lambda = f.iter().sum::<f64>() / ctot;
        for (fi, ci) in f.iter_mut().zip(&self.lumps) {
            *fi -= lambda * ci;
        }
        let mut u = alloc::vec![0.0; n];
        self.neumann.solve(&f, &mut u);
        u[self.pinned] = 0.0;
        self.check_residual(&u, &f, None)?;
        let mean = self.lumps.iter().zip(&u).map(|(c, x)| c * x).sum::<f64>() / ctot;
        for x in &mut u {
            *x -= mean;
        }
        let mut field = NodalField::new(self.mesh.clone(), u);
        if source_total == 0.0 || rhs.is_none() {
            if let Some((psi, periods)) = self.conjugate(&loads) {
                field.conjugate = Some(psi);
                field.periods = periods;
            }
        }
        Ok(field)
    }

    /// Relative residual of K·u = f over the rows in `rows` (all when `None`).
    fn check_residual(&self, u: &[f64], f: &[f64], rows: Option<&[bool]>) -> Result<(), SolveError> {
        let ku = self.k.mul(u);
        let mut r2 = 0.0;
        let mut f2 = 0.0;
        for i in 0..u.len() {
            if rows.is_some_and(|m| !m[i]) {
                continue;
            }
            r2 += (ku[i] - f[i]).powi(2);
            f2 += f[i] * f[i];
        }
        let rel = if f2 > 0.0 { (r2 / f2).sqrt() } else { r2.sqrt() };
        if rel < RESIDUAL_TOL {
            Ok(())
        } else {
            Err(SolveError::Residual(rel))
        }
    }

    /// Dirichlet solve interpolating `values` at boundary vertices.
    pub fn solve_dirichlet(&self, values: BoundaryFn<'_>) -> Result<NodalField, SolveError> {
        let n = self.mesh.vertices.len();
        let mut u = alloc::vec![0.0; n];
        for v in 0..n {
            if let Some(bp) = self.mesh.boundary_tags[v] {
                let x = values(bp);
                if !x.is_finite() {
                    return Err(SolveError::NonFinite(v));
                }
                u[v] = x;
            }
        }
        self.dirichlet_from(u).map(|u| NodalField::new(self.mesh.clone(), u))
    }

    /// Completes `u` (boundary entries set) with the discrete harmonic extension.
    fn dirichlet_from(&self, mut u: Vec<f64>) -> Result<Vec<f64>, SolveError> {
        let n = self.mesh.vertices.len();
        let Some(red) = &self.dirichlet else { return Ok(u) };
        let free: Vec<bool> = (0..n).map(|v| !self.mesh.is_boundary(v)).collect();
        let ub: Vec<f64> = (0..n).map(|v| if free[v] { 0.0 } else { u[v] }).collect();
        let kb = self.k.mul(&ub);
        let rhs: Vec<f64> = kb.iter().map(|x| -x).collect();
        red.solve(&rhs, &mut u);
        // Interior rows of K·u must vanish; measure them against the forcing.
        let ku = self.k.mul(&u);
        let r: f64 = (0..n).filter(|&i| free[i]).map(|i| ku[i] * ku[i]).sum::<f64>().sqrt();
        let f: f64 = (0..n).filter(|&i| free[i]).map(|i| rhs[i] * rhs[i]).sum::<f64>().sqrt();
        let rel = if f > 0.0 { r / f } else { r };
        if !(rel < RESIDUAL_TOL) {
            return Err(SolveError::Residual(rel));
        }
        Ok(u)
    }

    /// Discrete harmonic conjugate from the boundary flux increments of a
    /// Neumann solve. A hole with net flux F gets a period F/2π carried by a
    /// logarithm centred inside it, so the stored ψ stays single-valued.
    fn conjugate(&self, loads: &[(f64, f64)]) -> Option<(Vec<f64>, Vec<(Point, f64)>)> {
        let n = self.mesh.vertices.len();
        let nloops = self.mesh.boundary_edges.iter().map(|e| e.loop_index + 1).max().unwrap_or(0);
        let mut edge_flux: Vec<f64> = loads.iter().map(|(a, b)| a + b).collect();
        let mut periods = Vec::new();
        for h in 1..nloops {
            let ring: Vec<usize> = self.mesh.boundary_edges.iter().enumerate().filter(|(_, e)| e.loop_index == h).map(|(i, _)| i).collect();
            let total: f64 = ring.iter().map(|&i| edge_flux[i]).sum();
            let abs_total: f64 = ring.iter().map(|&i| edge_flux[i].abs()).sum();
            if total.abs() <= 1e-12 * abs_total.max(1.0) {
                continue;
            }
            let center = self.hole_point(h)?;
            let a = total / TAU;
            for (i, e) in self.mesh.boundary_edges.iter().enumerate() {
                let (p0, p1) = (self.mesh.vertices[e.v[0]], self.mesh.vertices[e.v[1]]);
                edge_flux[i] += a * subtended(center, p0, p1);
            }
            periods.push((center, a));
        }
        let mut psi = alloc::vec![0.0; n];
        let mut hole_vertices: Vec<Vec<usize>> = alloc::vec![Vec::new(); nloops];
        for l in 0..nloops {
            let edges: Vec<(usize, &BoundaryEdge)> =
                self.mesh.boundary_edges.iter().enumerate().filter(|(_, e)| e.loop_index == l).collect();
            let total: f64 = edges.iter().map(|(i, _)| edge_flux[*i]).sum();
            let length: f64 = edges.iter().map(|(_, e)| e.s1 - e.s0).sum();
            let abs_total: f64 = edges.iter().map(|(i, _)| edge_flux[*i].abs()).sum();
            if total.abs() > 1e-6 * abs_total.max(1.0) {
                return None;
            }
            let mut acc = 0.0;
            for (i, e) in &edges {
                psi[e.v[0]] = acc;
                let flux = edge_flux[*i] - total * (e.s1 - e.s0) / length;
                acc -= flux;
                hole_vertices[l].push(e.v[0]);
            }
        }
        let psi0 = self.dirichlet_from(psi).ok()?;
        let holes = nloops.saturating_sub(1);
        if holes == 0 {
            return Some((psi0, periods));
        }
        // Harmonic measures of each hole and constants making every hole's
        // discrete ψ-flux vanish.
        let mut omegas = Vec::with_capacity(holes);
        for h in 1..nloops {
            let mut w = alloc::vec![0.0; n];
            for &v in &hole_vertices[h] {
                w[v] = 1.0;
            }
            omegas.push(self.dirichlet_from(w).ok()?);
        }
        let flux_on = |u: &[f64], h: usize| -> f64 {
            let ku = self.k.mul(u);
            hole_vertices[h].iter().map(|&v| ku[v]).sum()
        };
        let a = nalgebra::DMatrix::from_fn(holes, holes, |i, j| flux_on(&omegas[j], i + 1));
        let b = nalgebra::DVector::from_fn(holes, |i, _| -flux_on(&psi0, i + 1));
        let c = a.lu().solve(&b)?;
        let mut psi = psi0;
        for (j, w) in omegas.iter().enumerate() {
            for v in 0..n {
                psi[v] += c[j] * w[v];
            }
        }
        Some((psi, periods))
    }

    /// A point strictly inside hole `h`, from an ear of its boundary polygon.
    fn hole_point(&self, h: usize) -> Option<Point> {
        let mut poly: Vec<Point> =
            self.mesh.boundary_edges.iter().filter(|e| e.loop_index == h).map(|e| self.mesh.vertices[e.v[0]]).collect();
        // Holes run clockwise; the ear clipper wants counter-clockwise input.
        poly.reverse();
        let ears = ear_clip(&poly);
        ears.iter()
            .max_by(|a, b| tri_area(a).total_cmp(&tri_area(b)))
            .map(|t| (t[0] + t[1] + t[2]) * (1.0 / 3.0))
    }
}

fn tri_area(t: &[Point; 3]) -> f64 {
    0.5 * (t[1] - t[0]).cross(t[2] - t[0]).abs()
}

/// Neumann solve on a fresh factorisation. Boundary addresses passed to `g`
/// carry exact positions on the domain curves.
pub fn solve_neumann(
    mesh: Arc<TriMesh>,
    domain: &DomainSpec,
    g: BoundaryFn<'_>,
    rhs: Option<SourceFn<'_>>,
) -> Result<NodalField, SolveError> {
    BackgroundSolver::new(mesh)?.solve_neumann_on(domain, g, rhs)
}

/// Dirichlet solve on a fresh factorisation.
pub fn solve_dirichlet(mesh: Arc<TriMesh>, values: BoundaryFn<'_>) -> Result<NodalField, SolveError> {
    BackgroundSolver::new(mesh)?.solve_dirichlet(values)
}

/// Consistent inward boundary flux −(K·u)_i / ℓ_i at each boundary vertex, with
/// ℓ_i the half-length of the two incident boundary edges.
pub fn consistent_boundary_flux(field: &NodalField) -> Vec<(usize, f64)> {
    let mesh = &field.mesh;
    let ku = mesh.apply_stiffness(&field.values);
    let mut ell = alloc::vec![0.0; mesh.vertices.len()];
    for e in &mesh.boundary_edges {
        let ds = e.s1 - e.s0;
        ell[e.v[0]] += 0.5 * ds;
        ell[e.v[1]] += 0.5 * ds;
    }
    (0..mesh.vertices.len()).filter(|&v| mesh.is_boundary(v)).map(|v| (v, -ku[v] / ell[v])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{disk, rectangle, BoundaryLoop, CurveSegment, Quantum};
    use core::f64::consts::{FRAC_PI_2, PI, TAU};

    fn annulus_sector() -> DomainSpec {
        let segs = alloc::vec![
            CurveSegment::line(Point::new(1.0, 0.0), Point::new(2.0, 0.0)),
            CurveSegment::arc_polar(Point::ZERO, 2.0, 0.0, FRAC_PI_2).unwrap(),
            CurveSegment::line(Point::new(0.0, 2.0), Point::new(0.0, 1.0)),
            CurveSegment::arc_polar(Point::ZERO, 1.0, FRAC_PI_2, -FRAC_PI_2).unwrap(),
        ];
        DomainSpec::new(alloc::vec![BoundaryLoop::new(segs)], Quantum::Quad).unwrap()
    }

    #[test]
    fn unit_square_mesh_size() {
        let d = rectangle(0.0, 0.0, 1.0, 1.0, Quantum::Quad);
        let m = triangulate(&d, 0.1).unwrap();
        assert!((200..=300).contains(&m.triangles.len()), "{}", m.triangles.len());
        let total: f64 = (0..m.triangles.len()).map(|t| m.area(t)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for t in 0..m.triangles.len() {
            assert!(m.area(t) > 0.0);
            assert!(m.circumradius(t) <= CIRCUMRADIUS_FACTOR * 0.1);
        }
    }

    #[test]
    fn rejects_bad_h() {
        let d = rectangle(0.0, 0.0, 1.0, 1.0, Quantum::Quad);
        assert!(matches!(triangulate(&d, 0.0), Err(MeshError::BadMeshSize { .. })));
        assert!(matches!(triangulate(&d, -1.0), Err(MeshError::BadMeshSize { .. })));
    }

    #[test]
    fn annulus_sector_edges_tagged() {
        let d = annulus_sector();
        let m = triangulate(&d, 0.05).unwrap();
        for e in &m.boundary_edges {
            let seg = d.segment(e.loop_index, e.segment);
            for (v, s) in [(e.v[0], e.s0), (e.v[1], e.s1)] {
                assert!(m.vertices[v].dist(seg.point_at(s)) < 1e-12);
            }
            let r0 = m.vertices[e.v[0]].norm();
            let r1 = m.vertices[e.v[1]].norm();
            match e.segment {
                1 => assert!((r0 - 2.0).abs() < 1e-12 && (r1 - 2.0).abs() < 1e-12),
                3 => assert!((r0 - 1.0).abs() < 1e-12 && (r1 - 1.0).abs() < 1e-12),
                _ => {}
            }
            // Interior on the left of each boundary edge.
            let mid = m.vertices[e.v[0]].lerp(m.vertices[e.v[1]], 0.5);
            let n = (m.vertices[e.v[1]] - m.vertices[e.v[0]]).perp().normalized();
            assert!(d.contains(mid + n * 1e-3));
        }
        for s in 0..4 {
            assert!(m.boundary_edges.iter().any(|e| e.segment == s));
        }
    }

    #[test]
    fn neumann_zero_data_gives_zero() {
        let d = rectangle(0.0, 0.0, 1.0, 1.0, Quantum::Quad);
        let m = Arc::new(triangulate(&d, 0.1).unwrap());
        let u = solve_neumann(m, &d, &|_| 0.0, None).unwrap();
        assert!(u.values.iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn neumann_rejects_incompatible_data() {
        let d = rectangle(0.0, 0.0, 1.0, 1.0, Quantum::Quad);
        let m = Arc::new(triangulate(&d, 0.1).unwrap());
        let err = solve_neumann(m, &d, &|_| 1.0, None).unwrap_err();
        match err {
            SolveError::Incompatible { defect } => assert!((defect - 4.0).abs() < 1e-12),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn neumann_disk_recovers_x() {
        // u = x has inward normal derivative −cos ψ on the unit circle.
        let d = disk(Point::ZERO, 1.0, Quantum::Quad);
        let m = Arc::new(triangulate(&d, 0.02).unwrap());
        let u = solve_neumann(m.clone(), &d, &|bp| -bp.position.x, None).unwrap();
        let shift = u.mean();
        let err = u.max_abs_diff(|p| p.x + shift);
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn dirichlet_constant_and_linear() {
        let d = disk(Point::ZERO, 1.0, Quantum::Quad);
        let m = Arc::new(triangulate(&d, 0.05).unwrap());
        let c = solve_dirichlet(m.clone(), &|_| 2.5).unwrap();
        assert!(c.values.iter().all(|x| (x - 2.5).abs() < 1e-12));
        let x = solve_dirichlet(m, &|bp| bp.position.x).unwrap();
        assert!(x.max_abs_diff(|p| p.x) < 1e-3);
    }

    #[test]
    fn annulus_neumann_and_dirichlet_match_log() {
        let d = annulus_sector();
        let m = Arc::new(triangulate(&d, 0.02).unwrap());
        let solver = BackgroundSolver::new(m).unwrap();
        // Inward derivative of −ln r: −1/R₁ on the inner arc, +1/R₂ on the outer one.
        let g = |bp: BoundaryPoint| match bp.segment {
            1 => 0.5,
            3 => -1.0,
            _ => 0.0,
        };
        let u = solver.solve_neumann_on(&d, &g, None).unwrap();
        let exact = |p: Point| -p.norm().ln();
        let mean_exact = {
            let c = u.mesh.mass_lumps();
            let tot: f64 = c.iter().sum();
            u.mesh.vertices.iter().zip(&c).map(|(p, w)| w * exact(*p)).sum::<f64>() / tot
        };
        let err = u.max_abs_diff(|p| exact(p) - mean_exact);
        assert!(err < 1e-3, "{err}");
        let v = solver.solve_dirichlet(&|bp| exact(bp.position)).unwrap();
        assert!(v.max_abs_diff(exact) < 1e-3);
        // Conjugate of −ln r is −θ (up to a constant): ψ_x = −u_y, ψ_y = u_x.
        let psi = u.conjugate.as_ref().expect("single loop");
        let p0 = Point::polar(1.5, 0.3);
        let p1 = Point::polar(1.5, 1.1);
        let dpsi = u.conjugate_value(p1).unwrap() - u.conjugate_value(p0).unwrap();
        assert!((dpsi + 0.8).abs() < 1e-3, "{dpsi}");
        assert_eq!(psi.len(), u.values.len());
    }

    #[test]
    fn consistent_flux_reproduces_neumann_data() {
        let d = disk(Point::ZERO, 1.0, Quantum::Quad);
        let m = Arc::new(triangulate(&d, 0.05).unwrap());
        let u = solve_neumann(m, &d, &|bp| -bp.position.x, None).unwrap();
        for (v, g) in consistent_boundary_flux(&u) {
            let x = u.mesh.vertices[v].x;
            assert!((g + x).abs() < 5e-3, "{g} vs {}", -x);
        }
    }

    #[test]
    fn ring_conjugate_carries_the_hole_period() {
        let outer = BoundaryLoop::new(alloc::vec![CurveSegment::arc_polar(Point::ZERO, 2.0, 0.0, TAU).unwrap()]);
        let hole = BoundaryLoop::new(alloc::vec![CurveSegment::arc_polar(Point::ZERO, 1.0, 0.0, -TAU).unwrap()]);
        let d = DomainSpec::new(alloc::vec![outer, hole], Quantum::Quad).unwrap();
        let solver = BackgroundSolver::new(Arc::new(triangulate(&d, 0.05).unwrap())).unwrap();
        // u = ln r: inward derivative −1/2 on the outer circle, +1 on the hole.
        let g = |bp: BoundaryPoint| if bp.loop_index == 0 { -0.5 } else { 1.0 };
        let u = solver.solve_neumann_on(&d, &g, None).unwrap();
        assert!(u.conjugate.is_some());
        assert_eq!(u.periods.len(), 1);
        let (c, a) = u.periods[0];
        assert!((a - 1.0).abs() < 1e-12, "{a}");
        assert!(c.norm() < 1.0);
    }

    #[test]
    fn locate_extrapolates_just_outside_chords() {
        let d = disk(Point::ZERO, 1.0, Quantum::Quad);
        let m = triangulate(&d, 0.1).unwrap();
        let p = Point::polar(0.9999, 0.05);
        assert!(m.locate(p).is_some());
        let _ = PI;
    }
}
