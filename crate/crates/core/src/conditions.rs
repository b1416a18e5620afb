//! Numerical checks of the four conditions a conformal factor must meet for a
//! boundary-aligned cross field to exist.
//!
//! Flux signs: cone flux is the outward ∮∂_rφ ds; every other flux is
//! ∫∂_Nφ ds with N the left normal of the curve it is measured along.
//! Condition 3 uses the arc around the junction turning counter-clockwise
//! through the domain, whose left normal points at the junction; a junction of
//! inner angle θ passes when that flux equals θ − n·q.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::background_solver::consistent_boundary_flux;
use crate::geometry::{CurveSegment, DomainSpec, GeometryError, Point, Quantum};
#[allow(unused_imports)]
use crate::math::Float;
use crate::math::{lattice, wrap_pi};
use crate::phi_field::{ConeClass, HarmonicPart, PhiError, PhiField};
use crate::quadrature::GaussLegendre;

/// Trapezoid nodes on cone circles.
pub const CONE_FLUX_NODES: usize = 256;
/// Samples per smooth segment for closed-form Condition-2 checks.
pub const CONDITION2_SAMPLES: usize = 65;
/// Junction arc radius as a fraction of the domain diameter.
pub const JUNCTION_RADIUS_FACTOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConditionError {
    #[error("circle of radius {radius} around ({x}, {y}) encloses another singularity")]
    Enclosure { x: f64, y: f64, radius: f64 },
    #[error("arc of radius {radius} around ({x}, {y}) leaves the domain")]
    ArcLeavesDomain { x: f64, y: f64, radius: f64 },
    #[error("junction valence n must be at least 1, got {0}")]
    NonPositiveValence(i64),
    #[error("inner angle {0} outside (0, 2π)")]
    BadAngle(f64),
    #[error("curve endpoints must lie on two different boundary loops")]
    Endpoints,
    #[error("no admissible connecting curve for loop {0}")]
    Routing(usize),
    #[error(transparent)]
    Phi(#[from] PhiError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Pass thresholds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Lattice defects must stay below this fraction of q.
    pub quantization: f64,
    /// Condition-2 residual bound for fields with a nodal part.
    pub residual_nodal: f64,
    /// Condition-2 residual bound for closed-form fields.
    pub residual_analytic: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { quantization: 0.02, residual_nodal: 1e-3, residual_analytic: 1e-6 }
    }
}

impl Tolerances {
    pub fn residual_for(&self, field: &PhiField) -> f64 {
        match field.harmonic {
            HarmonicPart::Nodal(_) => self.residual_nodal,
            _ => self.residual_analytic,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeFlux {
    pub position: Point,
    pub radius: f64,
    pub flux: f64,
    pub k: i64,
    pub defect: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition2Segment {
    pub loop_index: usize,
    pub segment: usize,
    /// sup |∂_Nφ − κ_g| over the evaluated samples.
    pub residual: f64,
    pub samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition3Result {
    pub position: Point,
    pub theta_in: f64,
    pub class: ConeClass,
    pub radius: f64,
    pub flux: f64,
    /// Index in flux = θ_in − n·q.
    pub n: i64,
    pub defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition4Result {
    pub hole: usize,
    pub path: Vec<Point>,
    pub flux: f64,
    pub theta1: f64,
    pub theta2: f64,
    /// Index in flux = θ₂ − θ₁ + n·q.
    pub n: i64,
    pub defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub quantum: Quantum,
    pub tolerances: Tolerances,
    pub residual_tolerance: f64,
    pub cones: Vec<ConeFlux>,
    pub condition2: Vec<Condition2Segment>,
    pub condition3: Vec<Condition3Result>,
    /// True for single-loop domains.
    pub condition4_vacuous: bool,
    pub condition4: Vec<Condition4Result>,
    pub condition1_pass: bool,
    pub condition2_pass: bool,
    pub condition3_pass: bool,
    pub condition4_pass: bool,
    pub pass: bool,
    pub notes: Vec<String>,
}

/// Singular points a measuring curve has to keep clear of: charges and the
/// centres of closed-form log terms.
fn singular_points(field: &PhiField) -> Vec<Point> {
    let mut pts: Vec<Point> = field.charges().iter().map(|c| c.position).collect();
    if let HarmonicPart::Closed(cf) = &field.harmonic {
        pts.extend(cf.logs.iter().map(|l| l.center));
    }
    pts
}

/// Outward flux of ∇φ through the circle of `radius` around `center`.
///
/// The closed-form part uses a 256-node trapezoid rule; a nodal φ_L with a
/// conjugate contributes its exact discrete circulation (zero).
pub fn circle_flux(field: &PhiField, center: Point, radius: f64) -> Result<f64, PhiError> {
    let n = CONE_FLUX_NODES;
    let dth = TAU / n as f64;
    let nodal = matches!(field.harmonic, HarmonicPart::Nodal(_));
    let mut total = 0.0;
    let mut ring = Vec::with_capacity(n + 1);
    for j in 0..n {
        let dir = Point::polar(1.0, j as f64 * dth);
        let p = center + dir * radius;
        ring.push(p);
        let mut g = field.singular_gradient(p);
        if !nodal {
            g += field.harmonic_gradient(p)?;
        }
        total += g.dot(dir) * radius * dth;
    }
    if nodal {
        ring.push(ring[0]);
        // Clockwise traversal has the outward left normal.
        ring.reverse();
        total += field.harmonic_flux(&ring)?;
    }
    Ok(total)
}

/// Flux around an interior cone and its distance to the lattice k·q.
pub fn check_cone_flux(field: &PhiField, cone: Point, radius: f64) -> Result<ConeFlux, ConditionError> {
    let enclosure = ConditionError::Enclosure { x: cone.x, y: cone.y, radius };
    for p in singular_points(field) {
        let d = p.dist(cone);
        if d > field.eps() && d <= radius * (1.0 + 1e-9) {
            return Err(enclosure);
        }
    }
    let flux = circle_flux(field, cone, radius)?;
    let (k, defect) = lattice(flux, field.q());
    Ok(ConeFlux { position: cone, radius, flux, k, defect })
}

/// Charge Q = 2π(n·q/θ_in − 1) that makes a junction of inner angle θ_in span
/// n quanta of the cross.
pub fn junction_charge(theta_in: f64, n: i64, q: f64) -> Result<f64, ConditionError> {
    if !(theta_in > 0.0 && theta_in < TAU) {
        return Err(ConditionError::BadAngle(theta_in));
    }
    if n <= 0 {
        return Err(ConditionError::NonPositiveValence(n));
    }
    let charge = TAU * (n as f64 * q / theta_in - 1.0);
    if charge >= TAU {
        warn!("junction charge {charge} at inner angle {theta_in} makes the manifold area diverge");
    }
    Ok(charge)
}

/// Flux through the arc of `radius` around a boundary point whose outgoing
/// boundary tangent has angle `psi_out` and whose inner angle is `theta_in`.
fn wedge_arc_flux(
    field: &PhiField,
    domain: &DomainSpec,
    center: Point,
    psi_out: f64,
    theta_in: f64,
    radius: f64,
) -> Result<f64, ConditionError> {
    let arc = CurveSegment::arc_polar(center, radius, psi_out, theta_in)?;
    let len = arc.length();
    for j in 1..16 {
        let p = arc.point_at(len * j as f64 / 16.0);
        if !domain.contains(p) {
            return Err(ConditionError::ArcLeavesDomain { x: center.x, y: center.y, radius });
        }
    }
    Ok(field.segment_flux(&arc)?)
}

/// Condition 3 at a boundary point with inner angle θ_in, extrapolated to a
/// vanishing radius from `radius` and `radius/2`.
pub fn check_condition3_at(
    field: &PhiField,
    domain: &DomainSpec,
    center: Point,
    psi_out: f64,
    theta_in: f64,
    radius: f64,
    class: ConeClass,
) -> Result<Condition3Result, ConditionError> {
    for p in singular_points(field) {
        let d = p.dist(center);
        if d > field.eps() && d <= radius * (1.0 + 1e-9) {
            return Err(ConditionError::Enclosure { x: center.x, y: center.y, radius });
        }
    }
    let f1 = wedge_arc_flux(field, domain, center, psi_out, theta_in, radius)?;
    let f2 = wedge_arc_flux(field, domain, center, psi_out, theta_in, 0.5 * radius)?;
    let flux = 2.0 * f2 - f1;
    let (m, defect) = lattice(theta_in - flux, field.q());
    Ok(Condition3Result { position: center, theta_in, class, radius, flux, n: m, defect })
}

/// Condition 3 for junction `index` of the domain.
pub fn check_condition3(
    field: &PhiField,
    domain: &DomainSpec,
    index: usize,
    radius: f64,
) -> Result<Condition3Result, ConditionError> {
    let j = &domain.junctions[index];
    check_condition3_at(field, domain, j.position, j.tangent_out, j.theta_in, radius, ConeClass::Junction)
}

/// Condition 2 residual sup|∂_Nφ − κ_g| for every boundary segment.
///
/// With a nodal φ_L the boundary flux of the discrete solution is the
/// variationally consistent −(K·u)_i/ℓ_i; the closed-form terms and κ are
/// averaged against the same hat functions so that both sides are compared
/// in one discrete sense. Junction vertices and vertices whose hat support
/// reaches a charge are skipped.
pub fn check_condition2(field: &PhiField, domain: &DomainSpec) -> Vec<Condition2Segment> {
    match &field.harmonic {
        HarmonicPart::Nodal(nodal) => condition2_nodal(field, domain, nodal),
        _ => condition2_sampled(field, domain),
    }
}

fn condition2_sampled(field: &PhiField, domain: &DomainSpec) -> Vec<Condition2Segment> {
    let mut out = Vec::new();
    for (li, l) in domain.loops.iter().enumerate() {
        for (si, seg) in l.segments.iter().enumerate() {
            let len = seg.length();
            // Polylines are compared at their samples, where the frame is known.
            let stations: Vec<f64> = match seg {
                CurveSegment::Polyline { cumulative, .. } if cumulative.len() > 2 => {
                    let inner = &cumulative[1..cumulative.len() - 1];
                    let stride = inner.len().div_ceil(CONDITION2_SAMPLES).max(1);
                    inner.iter().step_by(stride).copied().collect()
                }
                _ => (0..CONDITION2_SAMPLES).map(|j| len * (j as f64 + 0.5) / CONDITION2_SAMPLES as f64).collect(),
            };
            let mut residual: f64 = 0.0;
            let mut samples = 0;
            for s in stations {
                let p = seg.point_at(s);
                let Ok(g) = field.eval_grad_phi(p) else { continue };
                residual = residual.max((g.dot(seg.normal(s)) - seg.curvature(s)).abs());
                samples += 1;
            }
            out.push(Condition2Segment { loop_index: li, segment: si, residual, samples });
        }
    }
    out
}

fn condition2_nodal(
    field: &PhiField,
    domain: &DomainSpec,
    nodal: &crate::background_solver::NodalField,
) -> Vec<Condition2Segment> {
    let mesh = &nodal.mesh;
    let n = mesh.vertices.len();
    let gl = GaussLegendre::new(3);
    let charges = field.charges();
    // Hat-weighted integral of (∂_Nφ_analytic − κ) and the hat mass per vertex.
    let mut hat = alloc::vec![0.0; n];
    let mut ell = alloc::vec![0.0; n];
    let mut reach = alloc::vec![0.0f64; n];
    for e in &mesh.boundary_edges {
        let seg = domain.segment(e.loop_index, e.segment);
        let ds = e.s1 - e.s0;
        for (t, w) in gl.mapped(0.0, 1.0) {
            let s = e.s0 + t * ds;
            let p = seg.point_at(s);
            let nn = seg.normal(s);
            let mut g = field.singular_gradient(p);
            if let HarmonicPart::Closed(cf) = &field.harmonic {
                g += cf.gradient(p);
            }
            let a = g.dot(nn) - seg.curvature(s);
            hat[e.v[0]] += w * (1.0 - t) * a * ds;
            hat[e.v[1]] += w * t * a * ds;
        }
        ell[e.v[0]] += 0.5 * ds;
        ell[e.v[1]] += 0.5 * ds;
        let chord = mesh.vertices[e.v[0]].dist(mesh.vertices[e.v[1]]);
        reach[e.v[0]] = reach[e.v[0]].max(chord);
        reach[e.v[1]] = reach[e.v[1]].max(chord);
    }
    let jtol = 1e-9 * domain.diameter();
    let mut out: Vec<Condition2Segment> = Vec::new();
    for (li, l) in domain.loops.iter().enumerate() {
        for si in 0..l.segments.len() {
            out.push(Condition2Segment { loop_index: li, segment: si, residual: 0.0, samples: 0 });
        }
    }
    let index = |li: usize, si: usize| -> usize { domain.loops[..li].iter().map(|l| l.segments.len()).sum::<usize>() + si };
    for (v, flux) in consistent_boundary_flux(nodal) {
        let Some(tag) = mesh.boundary_tags[v] else { continue };
        let p = mesh.vertices[v];
        if domain.junctions.iter().any(|j| j.position.dist(p) < jtol) {
            continue;
        }
        if charges.iter().any(|c| c.position.dist(p) < 2.0 * reach[v]) {
            continue;
        }
        let r = (flux + hat[v] / ell[v]).abs();
        let slot = &mut out[index(tag.loop_index, tag.segment)];
        slot.residual = slot.residual.max(r);
        slot.samples += 1;
    }
    out
}

/// Cross transport mismatch along a curve from the outer loop to a hole.
pub fn check_condition4(
    field: &PhiField,
    domain: &DomainSpec,
    path: &[Point],
) -> Result<Option<Condition4Result>, ConditionError> {
    if domain.loops.len() < 2 {
        return Ok(None);
    }
    if path.len() < 2 {
        return Err(ConditionError::Endpoints);
    }
    let tol = 1e-7 * domain.diameter();
    let (d0, b0) = domain.closest_boundary(path[0]);
    let (d1, b1) = domain.closest_boundary(path[path.len() - 1]);
    if d0 > tol || d1 > tol || b0.loop_index == b1.loop_index {
        return Err(ConditionError::Endpoints);
    }
    let theta1 = domain.segment(b0.loop_index, b0.segment).tangent_angle(b0.s);
    let theta2 = domain.segment(b1.loop_index, b1.segment).tangent_angle(b1.s);
    let flux = field.normal_flux(path)?;
    let (n, defect) = lattice(flux - (theta2 - theta1), field.q());
    let hole = if b0.loop_index == 0 { b1.loop_index } else { b0.loop_index };
    Ok(Some(Condition4Result { hole, path: path.to_vec(), flux, theta1, theta2, n, defect }))
}

/// Shortest straight connection from the outer loop to each hole that keeps
/// clear of junctions and singularities.
pub fn route_condition4(field: &PhiField, domain: &DomainSpec) -> Result<Vec<Vec<Point>>, ConditionError> {
    let diam = domain.diameter();
    let singular = singular_points(field);
    let clearance = 0.02 * diam;
    let outer = &domain.loops[0];
    let mut routes = Vec::new();
    for h in 1..domain.loops.len() {
        let hole = &domain.loops[h];
        let extent = hole.length();
        let junction_gap = (0.05 * diam).min(0.05 * extent);
        let step = (diam / 400.0).min(extent / 64.0);
        let mut candidates: Vec<(f64, Point, Point)> = Vec::new();
        for seg in &hole.segments {
            for (_, p) in seg.sample(step) {
                let mut best = (f64::INFINITY, p);
                for os in &outer.segments {
                    let (d, s) = os.closest(p);
                    if d < best.0 {
                        best = (d, os.point_at(s));
                    }
                }
                candidates.push((best.0, best.1, p));
            }
        }
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
        let near_junction = |p: Point| domain.junctions.iter().any(|j| j.position.dist(p) < junction_gap);
        let admissible = |a: Point, b: Point| -> bool {
            if near_junction(a) || near_junction(b) {
                return false;
            }
            if singular.iter().any(|s| point_segment_distance(*s, a, b) < clearance) {
                return false;
            }
            (1..64).all(|j| domain.contains(a.lerp(b, j as f64 / 64.0)))
        };
        let route = candidates.iter().find(|(_, a, b)| admissible(*a, *b)).ok_or(ConditionError::Routing(h))?;
        routes.push(alloc::vec![route.1, route.2]);
    }
    Ok(routes)
}

fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = b - a;
    let t = if d.norm2() > 0.0 { ((p - a).dot(d) / d.norm2()).clamp(0.0, 1.0) } else { 0.0 };
    p.dist(a + d * t)
}

/// ∮(κ_g − ∂_Nφ) ds around a closed polygon (first point not repeated).
/// Curvature of a polygon is concentrated in its exterior angles.
pub fn closed_loop_defect(field: &PhiField, polygon: &[Point]) -> Result<f64, PhiError> {
    let n = polygon.len();
    let mut turning = 0.0;
    for i in 0..n {
        let a = polygon[(i + n - 1) % n];
        let b = polygon[i];
        let c = polygon[(i + 1) % n];
        let (u, v) = (b - a, c - b);
        turning += wrap_pi(v.angle() - u.angle());
    }
    let mut closed = polygon.to_vec();
    closed.push(polygon[0]);
    Ok(turning - field.normal_flux(&closed)?)
}

/// Radius for the interior cone flux check: a quarter of the clearance to
/// every other singularity and to the boundary.
pub fn cone_check_radius(field: &PhiField, domain: &DomainSpec, cone: Point) -> f64 {
    let mut clear = domain.boundary_distance(cone);
    for p in singular_points(field) {
        let d = p.dist(cone);
        if d > field.eps() {
            clear = clear.min(d);
        }
    }
    0.25 * clear
}

/// Runs all four checks with automatic radii and Condition-4 routes.
pub fn check_all(field: &PhiField, domain: &DomainSpec, tol: &Tolerances) -> Result<ConditionReport, ConditionError> {
    let q = field.q();
    let qtol = tol.quantization * q;
    let residual_tolerance = tol.residual_for(field);
    let mut notes = Vec::new();

    let mut cones = Vec::new();
    for c in field.cones.iter().filter(|c| c.class == ConeClass::Interior) {
        let r = cone_check_radius(field, domain, c.position);
        cones.push(check_cone_flux(field, c.position, r)?);
    }
    let condition1_pass = field
        .cones
        .iter()
        .filter(|c| c.class == ConeClass::Interior)
        .zip(&cones)
        .all(|(c, f)| f.defect < qtol && f.k == c.k as i64);

    let condition2 = check_condition2(field, domain);
    let condition2_pass = condition2.iter().all(|c| c.residual <= residual_tolerance);

    let radius = JUNCTION_RADIUS_FACTOR * domain.diameter();
    let mut condition3 = Vec::new();
    for i in 0..domain.junctions.len() {
        condition3.push(check_condition3(field, domain, i, radius)?);
    }
    for c in field.cones.iter().filter(|c| c.class == ConeClass::Boundary) {
        let (_, bp) = domain.closest_boundary(c.position);
        let psi = domain.segment(bp.loop_index, bp.segment).tangent_angle(bp.s);
        condition3.push(check_condition3_at(
            field,
            domain,
            c.position,
            psi,
            core::f64::consts::PI,
            radius,
            ConeClass::Boundary,
        )?);
    }
    let condition3_pass = condition3.iter().all(|c| c.defect < qtol);

    let condition4_vacuous = domain.loops.len() < 2;
    let mut condition4 = Vec::new();
    if !condition4_vacuous {
        for route in route_condition4(field, domain)? {
            if let Some(r) = check_condition4(field, domain, &route)? {
                condition4.push(r);
            }
        }
    } else {
        notes.push(String::from("condition 4 is vacuous on a single-loop domain"));
    }
    let condition4_pass = condition4.iter().all(|c| c.defect < qtol);

    let pass = condition1_pass && condition2_pass && condition3_pass && condition4_pass;
    Ok(ConditionReport {
        quantum: field.quantum,
        tolerances: *tol,
        residual_tolerance,
        cones,
        condition2,
        condition3,
        condition4_vacuous,
        condition4,
        condition1_pass,
        condition2_pass,
        condition3_pass,
        condition4_pass,
        pass,
        notes,
    })
}
