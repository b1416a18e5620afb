//! Random paths and loops for spot checks of cross-field consistency.

use conefield_core::conditions::closed_loop_defect;
use conefield_core::geodesics::{angle_between, cross_angle};
use conefield_core::geometry::BoundaryPoint;
use conefield_core::phi_field::HarmonicPart;
use conefield_core::{DomainSpec, PhiField, Point};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Points a random path must keep away from: charges and closed-form log centres.
fn singular_points(field: &PhiField) -> Vec<Point> {
    let mut v: Vec<Point> = field.charges().iter().map(|c| c.position).collect();
    if let HarmonicPart::Closed(c) = &field.harmonic {
        v.extend(c.logs.iter().map(|l| l.center));
    }
    v
}

fn seg_dist(p: Point, a: Point, b: Point) -> f64 {
    let d = b - a;
    let n2 = d.norm2();
    let t = if n2 > 0.0 { ((p - a).dot(d) / n2).clamp(0.0, 1.0) } else { 0.0 };
    p.dist(a + d * t)
}

fn segment_ok(domain: &DomainSpec, sing: &[Point], a: Point, b: Point, clear: f64, allow_end_on_boundary: bool) -> bool {
    if sing.iter().any(|c| seg_dist(*c, a, b) < clear) {
        return false;
    }
    let n = 48;
    (1..n).all(|i| {
        let p = a.lerp(b, i as f64 / n as f64);
        domain.contains(p) && (allow_end_on_boundary || domain.boundary_distance(p) > 1e-3 * domain.diameter())
    })
}

/// Winding number of the closed polygon `poly` (first point not repeated) about `c`.
fn winding(poly: &[Point], c: Point) -> i64 {
    let n = poly.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (u, v) = (poly[i] - c, poly[(i + 1) % n] - c);
            u.cross(v).atan2(u.dot(v))
        })
        .sum();
    (total / std::f64::consts::TAU).round() as i64
}

/// True when the closed polygon does not wind around any hole.
fn contractible(poly: &[Point], holes: &[Point]) -> bool {
    holes.iter().all(|h| winding(poly, *h) == 0)
}

fn random_interior<R: Rng>(domain: &DomainSpec, sing: &[Point], clear: f64, rng: &mut R) -> Point {
    let (lo, hi) = domain.bbox();
    loop {
        let p = Point::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
        if domain.contains(p) && domain.boundary_distance(p) > clear && sing.iter().all(|c| c.dist(p) > clear) {
            return p;
        }
    }
}

/// Smooth boundary point away from junctions and singular points.
fn random_base<R: Rng>(domain: &DomainSpec, sing: &[Point], clear: f64, rng: &mut R) -> BoundaryPoint {
    loop {
        let li = rng.random_range(0..domain.loops.len());
        let l = &domain.loops[li];
        let si = rng.random_range(0..l.segments.len());
        let seg = &l.segments[si];
        let len = seg.length();
        let s = rng.random_range(0.1 * len..0.9 * len);
        let p = seg.point_at(s);
        let near_junction = domain.junctions.iter().any(|j| j.position.dist(p) < clear);
        if !near_junction && sing.iter().all(|c| c.dist(p) > clear) {
            return BoundaryPoint { loop_index: li, segment: si, s, position: p };
        }
    }
}

/// Polyline from `a` to `b` through up to `hops` random interior waypoints.
fn random_path<R: Rng>(domain: &DomainSpec, sing: &[Point], clear: f64, a: Point, b: Point, hops: usize, rng: &mut R) -> Option<Vec<Point>> {
    for _ in 0..200 {
        let mut pts = vec![a];
        for _ in 0..rng.random_range(1..=hops) {
            pts.push(random_interior(domain, sing, clear, rng));
        }
        pts.push(b);
        if pts.windows(2).all(|w| segment_ok(domain, sing, w[0], w[1], clear, true)) {
            return Some(pts);
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathPairCheck {
    pub base: Point,
    pub target: Point,
    pub psi_a: f64,
    pub psi_b: f64,
    /// |ψ_a − ψ_b| reduced to the nearest multiple of q.
    pub mismatch: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopCheck {
    pub vertices: Vec<Point>,
    /// ∮(κ_g − ∂_Nφ) ds.
    pub holonomy: f64,
    pub defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyCheck {
    pub pairs: Vec<PathPairCheck>,
    pub loops: Vec<LoopCheck>,
    pub max_pair_mismatch: f64,
    pub max_loop_defect: f64,
}

fn lattice_distance(x: f64, q: f64) -> f64 {
    (x - (x / q).round() * q).abs()
}

/// Transports crosses along `pairs` random pairs of homotopic paths between
/// the same endpoints, and sums holonomy around `loops` random closed polygons
/// that do not wind around a hole. Cones may lie anywhere.
pub fn consistency_check<R: Rng>(field: &PhiField, domain: &DomainSpec, pairs: usize, loops: usize, rng: &mut R) -> ConsistencyCheck {
    let q = field.q();
    let sing = singular_points(field);
    let clear = 0.02 * domain.diameter();
    let holes: Vec<Point> = domain.loops.iter().skip(1).filter_map(|l| l.interior_point()).collect();
    let mut pair_out = Vec::with_capacity(pairs);
    let mut guard = 0;
    while pair_out.len() < pairs && guard < 50 * pairs.max(1) {
        guard += 1;
        let base = random_base(domain, &sing, clear, rng);
        let target = random_interior(domain, &sing, clear, rng);
        let (Some(pa), Some(pb)) = (
            random_path(domain, &sing, clear, base.position, target, 3, rng),
            random_path(domain, &sing, clear, base.position, target, 3, rng),
        ) else {
            continue;
        };
        let cycle: Vec<Point> = pa.iter().chain(pb.iter().rev().skip(1)).copied().collect();
        if !contractible(&cycle[..cycle.len() - 1], &holes) {
            continue;
        }
        let (Ok(a), Ok(b)) = (cross_angle(field, domain, base, &pa), cross_angle(field, domain, base, &pb)) else {
            continue;
        };
        let mismatch = lattice_distance(angle_between(a.psi, b.psi), q);
        pair_out.push(PathPairCheck { base: base.position, target, psi_a: a.psi, psi_b: b.psi, mismatch });
    }
    let mut loop_out = Vec::with_capacity(loops);
    guard = 0;
    while loop_out.len() < loops && guard < 50 * loops.max(1) {
        guard += 1;
        let n = rng.random_range(3..=6);
        let verts: Vec<Point> = (0..n).map(|_| random_interior(domain, &sing, clear, rng)).collect();
        let ok = (0..n).all(|i| segment_ok(domain, &sing, verts[i], verts[(i + 1) % n], clear, false));
        if !ok || !contractible(&verts, &holes) {
            continue;
        }
        let Ok(h) = closed_loop_defect(field, &verts) else { continue };
        loop_out.push(LoopCheck { vertices: verts, holonomy: h, defect: lattice_distance(h, q) });
    }
    let max_pair_mismatch = pair_out.iter().map(|p| p.mismatch).fold(0.0, f64::max);
    let max_loop_defect = loop_out.iter().map(|l| l.defect).fold(0.0, f64::max);
    ConsistencyCheck { pairs: pair_out, loops: loop_out, max_pair_mismatch, max_loop_defect }
}
