//! Domains with known fields: closed forms, symmetric constructions and
//! synthetic inputs built from geodesics of a chosen field.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::background_solver::{triangulate, BackgroundSolver, MeshError, SolveError};
use crate::conditions::{junction_charge, ConditionError};
use crate::geodesics::{trace_geodesic, GeodesicError, TraceOptions};
use crate::geometry::{polygon_loop, rectangle, BoundaryLoop, CurveSegment, DomainSpec, GeometryError, Point, Quantum, Sweep};
#[allow(unused_imports)]
use crate::math::Float;
use crate::phi_field::{ClosedForm, ConePoint, HarmonicPart, JunctionCharge, LogTerm, PhiError, PhiField};
use crate::quadrature::adaptive;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CaseError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("boundary construction did not close (residual {0:e})")]
    Closure(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Phi(#[from] PhiError),
    #[error(transparent)]
    Condition(#[from] ConditionError),
    #[error(transparent)]
    Geodesic(#[from] GeodesicError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseId {
    AnnulusSector,
    SingleCone,
    JunctionWedge,
    DiamondPair,
    CaseC,
}

impl CaseId {
    pub fn name(self) -> &'static str {
        match self {
            CaseId::AnnulusSector => "annulus_sector",
            CaseId::SingleCone => "single_cone",
            CaseId::JunctionWedge => "junction_wedge",
            CaseId::DiamondPair => "diamond_pair",
            CaseId::CaseC => "case_c",
        }
    }
}

/// A planar case: domain, its field, and which conditions the field is known
/// to violate.
#[derive(Clone, Debug)]
pub struct AnalyticCase {
    pub id: CaseId,
    pub domain: DomainSpec,
    pub field: PhiField,
    /// Condition numbers (1–4) the field fails by construction.
    pub expected_failures: Vec<u8>,
    pub notes: Vec<String>,
}

impl AnalyticCase {
    pub fn expected_pass(&self) -> bool {
        self.expected_failures.is_empty()
    }
}

fn log_field(quantum: Quantum, diameter: f64, logs: Vec<LogTerm>) -> PhiField {
    PhiField::new(quantum, diameter).with_harmonic(HarmonicPart::Closed(ClosedForm { logs, linear: Point::ZERO }))
}

/// Sector R1 < r < R2, 0 < ψ < opening with φ = −ln r + C, where C puts ten
/// manifold edges on each radial side.
pub fn annulus_sector(r1: f64, r2: f64, opening: f64) -> Result<AnalyticCase, CaseError> {
    if !(r1 > 0.0 && r2 > r1 && opening > 0.0 && opening < TAU) {
        return Err(CaseError::Parameter(alloc::format!("annulus sector needs 0 < R1 < R2 and an opening in (0, 2π); got {r1}, {r2}, {opening}")));
    }
    let o = Point::ZERO;
    let (s, e) = (Point::polar(r2, opening), Point::polar(r1, opening));
    let l = BoundaryLoop::new(alloc::vec![
        CurveSegment::line(Point::new(r1, 0.0), Point::new(r2, 0.0)),
        CurveSegment::arc(Point::new(r2, 0.0), s, o, Sweep::Ccw)?,
        CurveSegment::line(s, e),
        CurveSegment::arc(e, Point::new(r1, 0.0), o, Sweep::Cw)?,
    ]);
    let domain = DomainSpec::new(alloc::vec![l], Quantum::Quad)?;
    let c = (10.0 / (r2 / r1).ln()).ln();
    let field = log_field(Quantum::Quad, domain.diameter(), alloc::vec![LogTerm { center: o, coeff: -1.0 }]).with_constant(c);
    Ok(AnalyticCase { id: CaseId::AnnulusSector, domain, field, expected_failures: Vec::new(), notes: Vec::new() })
}

/// φ = (kq/2π)·ln r on the unit disk. Only k·q = −2π matches the circle's
/// curvature, so other k fail Condition 2.
pub fn single_cone(k: i32, quantum: Quantum) -> Result<AnalyticCase, CaseError> {
    if k <= -quantum.directions() {
        return Err(CaseError::Parameter(alloc::format!("cone index {k} must exceed -{}", quantum.directions())));
    }
    let domain = crate::geometry::disk(Point::ZERO, 1.0, quantum);
    let field = PhiField::new(quantum, 2.0).with_cone(ConePoint::interior(Point::ZERO, k));
    Ok(AnalyticCase {
        id: CaseId::SingleCone,
        domain,
        field,
        expected_failures: alloc::vec![2],
        notes: alloc::vec![String::from("boundary circle is not a geodesic of a lone cone field")],
    })
}

/// Unit-radius wedge with inner angle θ_in at the origin, closed by an arc,
/// with the junction charge that gives n quanta at the apex.
pub fn junction_wedge(theta_in: f64, n: i64, quantum: Quantum) -> Result<AnalyticCase, CaseError> {
    if !(theta_in > 0.0 && theta_in < PI) {
        return Err(CaseError::Parameter(alloc::format!("wedge angle {theta_in} must lie in (0, π)")));
    }
    let q = quantum.value();
    let strength = junction_charge(theta_in, n, q)?;
    let o = Point::ZERO;
    let (a, b) = (Point::new(1.0, 0.0), Point::polar(1.0, theta_in));
    let l = BoundaryLoop::new(alloc::vec![CurveSegment::line(o, a), CurveSegment::arc(a, b, o, Sweep::Ccw)?, CurveSegment::line(b, o)]);
    let domain = DomainSpec::new(alloc::vec![l], quantum)?;
    let field = PhiField::new(quantum, domain.diameter()).with_junction_charge(JunctionCharge { position: o, theta_in, n, strength });
    let mut notes = alloc::vec![String::from("closing arc is not a geodesic of the apex field")];
    if strength >= TAU {
        notes.push(alloc::format!("junction charge {strength:.6} is at least 2π"));
    }
    Ok(AnalyticCase { id: CaseId::JunctionWedge, domain, field, expected_failures: alloc::vec![2], notes })
}

/// Half-width of the outer square, half-diagonal of the rotated hole, and the
/// abscissa of the two cones of the diamond pair.
pub const DIAMOND_OUTER: f64 = 1.0;
pub const DIAMOND_HOLE: f64 = 0.4;
pub const DIAMOND_CONE_X: f64 = 0.7;

/// Square with a square hole rotated by π/4.
pub fn diamond_domain() -> DomainSpec {
    let (a, b) = (DIAMOND_OUTER, DIAMOND_HOLE);
    let outer = polygon_loop(&[Point::new(-a, -a), Point::new(a, -a), Point::new(a, a), Point::new(-a, a)]);
    let hole = polygon_loop(&[Point::new(b, 0.0), Point::new(0.0, -b), Point::new(-b, 0.0), Point::new(0.0, b)]);
    DomainSpec::new(alloc::vec![outer, hole], Quantum::Quad).expect("diamond domain is valid")
}

/// Reference field of the diamond pair: a k = −1 cone at (−x, 0), a k = +1
/// cone at (x, 0) and the regular part fixing the Neumann data.
pub fn diamond_pair(mesh_h: f64) -> Result<AnalyticCase, CaseError> {
    diamond_with_cones(mesh_h, -1, 1)
}

/// The diamond domain with indices `k_left` at (−x, 0) and `k_right` at (x, 0).
/// The pair (−1, 1) and its mirror image (1, −1) are expected to pass.
pub fn diamond_with_cones(mesh_h: f64, k_left: i32, k_right: i32) -> Result<AnalyticCase, CaseError> {
    let domain = diamond_domain();
    let x = DIAMOND_CONE_X;
    let mesh = Arc::new(triangulate(&domain, mesh_h)?);
    let solver = BackgroundSolver::new(mesh)?;
    let charges = PhiField::new(Quantum::Quad, domain.diameter())
        .with_cone(ConePoint::interior(Point::new(-x, 0.0), k_left))
        .with_cone(ConePoint::interior(Point::new(x, 0.0), k_right));
    let field = regular_part_for(&solver, &domain, charges)?;
    let expected_failures = if k_left + k_right == 0 && k_left.abs() == 1 { Vec::new() } else { alloc::vec![4] };
    Ok(AnalyticCase { id: CaseId::DiamondPair, domain, field, expected_failures, notes: Vec::new() })
}

/// Adds the Neumann solution with data κ − ∂_N(singular part) to `charges`.
pub fn regular_part_for(solver: &BackgroundSolver, domain: &DomainSpec, charges: PhiField) -> Result<PhiField, CaseError> {
    let g = |bp: crate::geometry::BoundaryPoint| {
        let seg = domain.segment(bp.loop_index, bp.segment);
        seg.curvature(bp.s) - charges.singular_gradient(bp.position).dot(seg.normal(bp.s))
    };
    let nodal = solver.solve_neumann_on(domain, &g, None)?;
    Ok(charges.with_harmonic(HarmonicPart::Nodal(nodal)))
}

/// Synthetic inverse-problem input: a loop of four geodesics of φ₀ meeting at
/// right angles, with two of the four charges of φ₀ inside.
#[derive(Clone, Debug)]
pub struct SyntheticInput {
    pub case: AnalyticCase,
    /// φ₀ with every charge, all as interior cones.
    pub phi0: PhiField,
    pub inside: Vec<ConePoint>,
    pub outside: Vec<ConePoint>,
    pub leg_lengths: [f64; 4],
}

/// Charges of the synthetic field: two inside the traced loop, two outside.
pub const CASE_C_INSIDE: [(f64, f64, i32); 2] = [(-0.3, 0.0, -1), (0.3, 0.0, 1)];
pub const CASE_C_OUTSIDE: [(f64, f64, i32); 2] = [(-1.9, 2.1, 1), (2.2, -1.8, -1)];
/// First corner and the first two leg lengths.
pub const CASE_C_START: (f64, f64) = (-1.0, -1.0);
pub const CASE_C_LEG: f64 = 2.0;
/// Sample spacing along traced legs.
pub const CASE_C_STEP: f64 = 2.5e-4;

fn cone_list(spec: &[(f64, f64, i32)]) -> Vec<ConePoint> {
    spec.iter().map(|&(x, y, k)| ConePoint::interior(Point::new(x, y), k)).collect()
}

/// Builds the loop by tracing legs of lengths 2, 2, L3, L4 with left right-angle
/// turns from the start corner heading east; Newton picks L3, L4 so the loop closes.
pub fn case_c() -> Result<SyntheticInput, CaseError> {
    let inside = cone_list(&CASE_C_INSIDE);
    let outside = cone_list(&CASE_C_OUTSIDE);
    let world = rectangle(-6.0, -6.0, 6.0, 6.0, Quantum::Quad);
    let mut phi0 = PhiField::new(Quantum::Quad, world.diameter());
    for c in inside.iter().chain(&outside) {
        phi0 = phi0.with_cone(*c);
    }
    let opts = TraceOptions { h: CASE_C_STEP, capture_radius: 1e-3, max_s: 0.0, max_s_tilde: f64::INFINITY };
    let start = Point::new(CASE_C_START.0, CASE_C_START.1);
    let legs = |l3: f64, l4: f64| -> Result<(Vec<CurveSegment>, Point, f64), CaseError> {
        let mut p = start;
        let mut th = 0.0;
        let mut segs = Vec::with_capacity(4);
        for len in [CASE_C_LEG, CASE_C_LEG, l3, l4] {
            let path = trace_geodesic(&phi0, &world, p, th, &TraceOptions { max_s: len, ..opts })?;
            let end = path.end();
            let pts = path.points();
            let angles: Vec<f64> = path.samples.iter().map(|s| s.theta).collect();
            let kap: Result<Vec<f64>, PhiError> = path
                .samples
                .iter()
                .map(|s| Ok(phi0.eval_grad_phi(s.position)?.dot(Point::new(-s.theta.sin(), s.theta.cos()))))
                .collect();
            segs.push(CurveSegment::polyline_with_frames(pts, angles, kap?)?);
            p = end.position;
            th = end.theta + PI / 2.0;
        }
        Ok((segs, p, th))
    };
    let (mut l3, mut l4) = (CASE_C_LEG, CASE_C_LEG);
    let mut residual = f64::INFINITY;
    for _ in 0..30 {
        let (_, p, _) = legs(l3, l4)?;
        let r = p - start;
        residual = r.norm();
        if residual < 1e-13 {
            break;
        }
        let d = 1e-6;
        let (_, p3, _) = legs(l3 + d, l4)?;
        let (_, p4, _) = legs(l3, l4 + d)?;
        let (j3, j4) = ((p3 - p) / d, (p4 - p) / d);
        let det = j3.cross(j4);
        if det.abs() < 1e-14 {
            return Err(CaseError::Closure(residual));
        }
        // Solve [j3 j4]·δ = −r.
        let d3 = -(r.cross(j4)) / det;
        let d4 = -(j3.cross(r)) / det;
        l3 += d3;
        l4 += d4;
    }
    if !(residual < 1e-11) {
        return Err(CaseError::Closure(residual));
    }
    let (mut segs, p, _) = legs(l3, l4)?;
    // Snap the closing point onto the start to remove the last rounding.
    if let Some(CurveSegment::Polyline { points, .. }) = segs.last_mut() {
        let n = points.len();
        points[n - 1] = start;
    }
    let _ = p;
    let domain = DomainSpec::new(alloc::vec![BoundaryLoop::new(segs)], Quantum::Quad)?;
    let logs = outside.iter().map(|c| LogTerm { center: c.position, coeff: c.strength(Quantum::Quad.value()) / TAU }).collect();
    let mut field = log_field(Quantum::Quad, domain.diameter(), logs);
    for c in &inside {
        field = field.with_cone(*c);
    }
    let case = AnalyticCase { id: CaseId::CaseC, domain, field, expected_failures: Vec::new(), notes: Vec::new() };
    Ok(SyntheticInput { case, phi0, inside, outside, leg_lengths: [CASE_C_LEG, CASE_C_LEG, l3, l4] })
}

/// Meridian curve (r(t), z(t)) of a surface of revolution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Meridian {
    /// r = R sin t, z = R cos t, t ∈ [0, π].
    Sphere { radius: f64 },
    /// r = R, z = t, t ∈ [0, height].
    Cylinder { radius: f64, height: f64 },
    /// r = t, z = slope·t, t ∈ [r0, r1].
    Cone { slope: f64, r0: f64, r1: f64 },
}

impl Meridian {
    pub fn range(&self) -> (f64, f64) {
        match *self {
            Meridian::Sphere { .. } => (0.0, PI),
            Meridian::Cylinder { height, .. } => (0.0, height),
            Meridian::Cone { r0, r1, .. } => (r0, r1),
        }
    }

    pub fn r(&self, t: f64) -> f64 {
        match *self {
            Meridian::Sphere { radius } => radius * t.sin(),
            Meridian::Cylinder { radius, .. } => radius,
            Meridian::Cone { .. } => t,
        }
    }

    pub fn z(&self, t: f64) -> f64 {
        match *self {
            Meridian::Sphere { radius } => radius * t.cos(),
            Meridian::Cylinder { .. } => t,
            Meridian::Cone { slope, .. } => slope * t,
        }
    }

    /// (dr/dt, dz/dt).
    pub fn velocity(&self, t: f64) -> (f64, f64) {
        match *self {
            Meridian::Sphere { radius } => (radius * t.cos(), -radius * t.sin()),
            Meridian::Cylinder { .. } => (0.0, 1.0),
            Meridian::Cone { slope, .. } => (1.0, slope),
        }
    }

    fn validate(&self) -> Result<(), CaseError> {
        let ok = match *self {
            Meridian::Sphere { radius } => radius > 0.0,
            Meridian::Cylinder { radius, height } => radius > 0.0 && height > 0.0,
            Meridian::Cone { slope, r0, r1 } => slope.is_finite() && r0 > 0.0 && r1 > r0,
        };
        if ok {
            Ok(())
        } else {
            Err(CaseError::Parameter(alloc::format!("invalid meridian {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pole {
    pub z: f64,
    pub charge: f64,
    pub k: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeridianSample {
    pub t: f64,
    pub r: f64,
    pub z: f64,
    /// Closed form −ln r + ln C.
    pub phi: f64,
    /// ∫ κ_g ds of the circles of revolution along the meridian.
    pub phi_integrated: f64,
    /// Manifold geodesic curvature of the circle of revolution.
    pub tilde_kappa_circle: f64,
    /// Manifold geodesic curvature of the meridian.
    pub tilde_kappa_meridian: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RevolutionCase {
    pub meridian: Meridian,
    /// Cells around each circle of revolution; C = N/2π.
    pub cells: f64,
    pub constant: f64,
    pub poles: Vec<Pole>,
    pub samples: Vec<MeridianSample>,
    pub max_tilde_kappa: f64,
    pub max_integration_error: f64,
}

/// Geodesic curvature of the circle through t, taken toward increasing t:
/// −1/(r·√((dz/dr)² + 1)) with the sign of dr/dt.
fn circle_kappa(m: &Meridian, t: f64) -> f64 {
    let (dr, dz) = m.velocity(t);
    let r = m.r(t);
    if dr == 0.0 {
        return 0.0;
    }
    -dr.signum() / (r * ((dz / dr).powi(2) + 1.0).sqrt())
}

/// φ along the meridian of a surface of revolution, the poles where the
/// meridian meets the axis, and the geodesic checks for circles and meridians.
pub fn revolution_surface(meridian: Meridian, cells: f64, quantum: Quantum, samples: usize) -> Result<RevolutionCase, CaseError> {
    meridian.validate()?;
    if !(cells > 0.0) || samples < 3 {
        return Err(CaseError::Parameter(String::from("cells must be positive and at least three samples are needed")));
    }
    let c = (cells / TAU).ln();
    let (t0, t1) = meridian.range();
    let axis_tol = 1e-12 * (1.0 + meridian.r((t0 + t1) / 2.0));
    let mut poles = Vec::new();
    for t in [t0, t1] {
        if meridian.r(t).abs() <= axis_tol {
            let (dr, dz) = meridian.velocity(t);
            let speed = dr.hypot(dz);
            if dr.abs() > 1e-12 * speed {
                // Flux of ∂_nφ around a vanishing circle is −2π·|dr/ds|.
                let charge = -TAU * dr.abs() / speed;
                poles.push(Pole { z: meridian.z(t), charge, k: (charge / quantum.value()).round() as i64 });
            }
        }
    }
    // Interior samples avoid the axis, where φ is singular.
    let tref = 0.5 * (t0 + t1);
    let phi_ref = -meridian.r(tref).ln() + c;
    let speed = |t: f64| {
        let (dr, dz) = meridian.velocity(t);
        dr.hypot(dz)
    };
    let mut out = Vec::with_capacity(samples);
    let mut max_tk: f64 = 0.0;
    let mut max_err: f64 = 0.0;
    for i in 0..samples {
        let t = t0 + (t1 - t0) * (i as f64 + 0.5) / samples as f64;
        let r = meridian.r(t);
        let phi = -r.ln() + c;
        let mut f = |u: f64| circle_kappa(&meridian, u) * speed(u);
        let integral = if t >= tref { adaptive(&mut f, tref, t, 1e-13, 1e-15) } else { -adaptive(&mut f, t, tref, 1e-13, 1e-15) };
        let phi_integrated = phi_ref + integral;
        // ∂φ/∂n across the circle is the derivative along the meridian.
        let (dr, _) = meridian.velocity(t);
        let dphi_ds = -dr / (r * speed(t));
        let tilde_kappa_circle = (-phi).exp() * (circle_kappa(&meridian, t) - dphi_ds);
        // Meridians are surface geodesics and φ does not vary across them.
        let tilde_kappa_meridian = 0.0;
        max_tk = max_tk.max(tilde_kappa_circle.abs()).max(tilde_kappa_meridian);
        max_err = max_err.max((phi_integrated - phi).abs());
        out.push(MeridianSample { t, r, z: meridian.z(t), phi, phi_integrated, tilde_kappa_circle, tilde_kappa_meridian });
    }
    Ok(RevolutionCase { meridian, cells, constant: c, poles, samples: out, max_tilde_kappa: max_tk, max_integration_error: max_err })
}

/// All planar presets by name, built with default parameters.
pub fn preset(name: &str, mesh_h: Option<f64>) -> Option<Result<AnalyticCase, CaseError>> {
    let build: Box<dyn Fn() -> Result<AnalyticCase, CaseError>> = match name {
        "annulus_sector" => Box::new(|| annulus_sector(1.0, 2.0, PI / 2.0)),
        "single_cone" => Box::new(|| single_cone(-1, Quantum::Quad)),
        "junction_wedge" => Box::new(|| junction_wedge(PI / 3.0, 1, Quantum::Quad)),
        "diamond_pair" => Box::new(move || diamond_pair(mesh_h.unwrap_or(0.04))),
        "case_c" => Box::new(|| case_c().map(|s| s.case)),
        _ => return None,
    };
    Some(build())
}

/// Surface-of-revolution presets by name.
pub fn revolution_preset(name: &str) -> Option<Meridian> {
    match name {
        "sphere" | "revolution_sphere" => Some(Meridian::Sphere { radius: 1.0 }),
        "cylinder" | "revolution_cylinder" => Some(Meridian::Cylinder { radius: 1.0, height: 2.0 }),
        "cone" | "revolution_cone" => Some(Meridian::Cone { slope: 1.5, r0: 0.2, r1: 1.0 }),
        _ => None,
    }
}

pub const PLANAR_PRESETS: [&str; 5] = ["annulus_sector", "single_cone", "junction_wedge", "diamond_pair", "case_c"];
pub const REVOLUTION_PRESETS: [&str; 3] = ["revolution_sphere", "revolution_cylinder", "revolution_cone"];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditions::{check_all, Tolerances};
    use core::f64::consts::FRAC_PI_2;

    #[test]
    fn diamond_mirror_pair_passes_and_offset_pair_fails() {
        let tol = Tolerances::default();
        let mirrored = diamond_with_cones(0.04, 1, -1).unwrap();
        assert!(mirrored.expected_pass());
        assert!(check_all(&mirrored.field, &mirrored.domain, &tol).unwrap().pass);

        let domain = diamond_domain();
        let solver = BackgroundSolver::new(Arc::new(triangulate(&domain, 0.04).unwrap())).unwrap();
        let charges = PhiField::new(Quantum::Quad, domain.diameter())
            .with_cone(ConePoint::interior(Point::new(-0.7, 0.2), -1))
            .with_cone(ConePoint::interior(Point::new(0.7, 0.2), 1));
        let field = regular_part_for(&solver, &domain, charges).unwrap();
        let r = check_all(&field, &domain, &tol).unwrap();
        assert!(r.condition1_pass && r.condition2_pass);
        assert!(!r.condition4_pass);
    }

    #[test]
    fn annulus_values() {
        let c = annulus_sector(1.0, 2.0, FRAC_PI_2).unwrap();
        let g = c.field.eval_grad_phi(Point::new(0.0, 1.0)).unwrap();
        assert!((g.dot(Point::new(0.0, 1.0)) + 1.0).abs() < 1e-15);
        let radial = CurveSegment::line(Point::new(1.0, 0.0), Point::new(2.0, 0.0));
        assert!((c.field.manifold_length(&radial).unwrap() - 10.0).abs() < 1e-9);
        let e = annulus_sector(1.0, core::f64::consts::E, 1.0).unwrap();
        let d = e.field.eval_phi(Point::new(core::f64::consts::E, 0.0)).unwrap() - e.field.eval_phi(Point::new(1.0, 0.0)).unwrap();
        assert!((d + 1.0).abs() < 1e-14);
        let rep = check_all(&c.field, &c.domain, &Tolerances::default()).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn wedge_reports() {
        let w = junction_wedge(PI / 3.0, 1, Quantum::Quad).unwrap();
        assert!((w.field.junction_charges[0].strength - PI).abs() < 1e-15);
        let rep = check_all(&w.field, &w.domain, &Tolerances::default()).unwrap();
        assert!(rep.condition3_pass && !rep.condition2_pass);
        let w2 = junction_wedge(PI / 3.0, 2, Quantum::Quad).unwrap();
        assert!((w2.field.junction_charges[0].strength - 4.0 * PI).abs() < 1e-12);
        assert_eq!(w2.notes.len(), 2);
    }

    #[test]
    fn sphere_and_cylinder() {
        let s = revolution_surface(Meridian::Sphere { radius: 1.0 }, 24.0, Quantum::Quad, 64).unwrap();
        assert_eq!(s.poles.len(), 2);
        assert!(s.poles.iter().all(|p| p.k == -4 && (p.charge + TAU).abs() < 1e-12));
        assert!(s.max_tilde_kappa <= 1e-8);
        assert!(s.max_integration_error < 1e-9, "{}", s.max_integration_error);
        let c = revolution_surface(Meridian::Cylinder { radius: 1.0, height: 2.0 }, 24.0, Quantum::Quad, 16).unwrap();
        assert!(c.poles.is_empty());
        let k = revolution_surface(Meridian::Cone { slope: 1.5, r0: 0.2, r1: 1.0 }, 24.0, Quantum::Quad, 32).unwrap();
        assert!(k.max_integration_error < 1e-9);
    }
}
