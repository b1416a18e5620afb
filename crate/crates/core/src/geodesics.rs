//! Cross-field geodesics of the φ-manifold.
//!
//! A geodesic of e^{2φ}g is a plane curve whose curvature equals ∂_Nφ, N the
//! left normal. Crosses are transported along any path at the same rate, so
//! the cross angle at a point is the boundary tangent at a base point plus the
//! normal flux along the connecting path.

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::geometry::{BoundaryPoint, CurveSegment, DomainSpec, GeometryError, Point};
#[allow(unused_imports)]
use crate::math::Float;
use crate::math::modulo;
use crate::phi_field::{ConeClass, ConePoint, PhiError, PhiField};
use crate::quadrature::GaussLegendre;

/// Capture radius as a fraction of the domain diameter.
pub const CAPTURE_FACTOR: f64 = 1e-3;
/// Default RK4 step as a fraction of the domain diameter.
pub const STEP_FACTOR: f64 = 1e-3;
/// Largest accepted tangent change per step before halving.
pub const MAX_TURN: f64 = 0.1;
/// Boundary crossings are located to this arclength.
pub const CROSSING_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeodesicError {
    #[error("start ({x}, {y}) is outside the domain or on a singularity")]
    InvalidStart { x: f64, y: f64 },
    #[error("path passes within {eps} of a singular point near ({x}, {y})")]
    Proximity { x: f64, y: f64, eps: f64 },
    #[error("cone is not interior")]
    NotInterior,
    #[error("cone index k = {k} has no star geodesics (needs k > -{directions})")]
    Valence { k: i32, directions: i32 },
    #[error("spacing must be positive, got {0}")]
    Spacing(f64),
    #[error("path must start at the base point")]
    PathStart,
    #[error(transparent)]
    Phi(#[from] PhiError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Boundary,
    ConeCapture,
    MaxLength,
    LeftDomain,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicSample {
    pub position: Point,
    pub theta: f64,
    /// Euclidean arclength.
    pub s: f64,
    /// Manifold arclength ∫e^φ ds.
    pub s_tilde: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicPath {
    pub samples: Vec<GeodesicSample>,
    pub termination: Termination,
    /// Index into the field's cones when captured.
    pub captured: Option<usize>,
}

impl GeodesicPath {
    pub fn points(&self) -> Vec<Point> {
        self.samples.iter().map(|s| s.position).collect()
    }

    pub fn end(&self) -> GeodesicSample {
        self.samples[self.samples.len() - 1]
    }

    pub fn length(&self) -> f64 {
        self.end().s
    }

    pub fn manifold_length(&self) -> f64 {
        self.end().s_tilde
    }

    /// The path as a polyline segment carrying the traced tangents, with
    /// curvature from differences of θ.
    pub fn to_segment(&self) -> Result<CurveSegment, GeometryError> {
        let pts = self.points();
        let th: Vec<f64> = self.samples.iter().map(|s| s.theta).collect();
        let n = th.len();
        let kap = (0..n)
            .map(|i| {
                let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
                let ds = self.samples[b].s - self.samples[a].s;
                if ds > 0.0 {
                    (th[b] - th[a]) / ds
                } else {
                    0.0
                }
            })
            .collect();
        CurveSegment::polyline_with_frames(pts, th, kap)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceOptions {
    /// Largest RK4 step in Euclidean arclength.
    pub h: f64,
    pub capture_radius: f64,
    pub max_s: f64,
    pub max_s_tilde: f64,
}

impl TraceOptions {
    pub fn for_domain(domain: &DomainSpec) -> Self {
        let d = domain.diameter();
        TraceOptions { h: STEP_FACTOR * d, capture_radius: CAPTURE_FACTOR * d, max_s: 20.0 * d, max_s_tilde: f64::INFINITY }
    }
}

#[derive(Clone, Copy, Debug)]
struct State {
    p: Point,
    theta: f64,
    s: f64,
    st: f64,
}

fn deriv(field: &PhiField, p: Point, theta: f64) -> Result<(Point, f64, f64), PhiError> {
    let (sn, cs) = theta.sin_cos();
    let g = field.eval_grad_phi(p)?;
    let e = field.eval_phi(p)?.exp();
    Ok((Point::new(cs, sn), g.dot(Point::new(-sn, cs)), e))
}

fn rk4(field: &PhiField, y: State, h: f64) -> Result<State, PhiError> {
    let (d1, t1, e1) = deriv(field, y.p, y.theta)?;
    let (d2, t2, e2) = deriv(field, y.p + d1 * (0.5 * h), y.theta + 0.5 * h * t1)?;
    let (d3, t3, e3) = deriv(field, y.p + d2 * (0.5 * h), y.theta + 0.5 * h * t2)?;
    let (d4, t4, e4) = deriv(field, y.p + d3 * h, y.theta + h * t3)?;
    Ok(State {
        p: y.p + (d1 + d2 * 2.0 + d3 * 2.0 + d4) * (h / 6.0),
        theta: y.theta + h / 6.0 * (t1 + 2.0 * t2 + 2.0 * t3 + t4),
        s: y.s + h,
        st: y.st + h / 6.0 * (e1 + 2.0 * e2 + 2.0 * e3 + e4),
    })
}

fn sample(y: &State) -> GeodesicSample {
    GeodesicSample { position: y.p, theta: y.theta, s: y.s, s_tilde: y.st }
}

/// Integrates the geodesic equation from `start` with tangent angle `direction`.
///
/// Steps are min(h, 0.1/|∇φ|, half the distance to the nearest charge) and
/// are halved while θ turns by more than [`MAX_TURN`].
pub fn trace_geodesic(
    field: &PhiField,
    domain: &DomainSpec,
    start: Point,
    direction: f64,
    opts: &TraceOptions,
) -> Result<GeodesicPath, GeodesicError> {
    trace_inner(field, domain, start, direction, opts, None)
}

fn nearest_charge(field: &PhiField, p: Point, skip: Option<usize>) -> (f64, Option<usize>) {
    let mut best = (f64::INFINITY, None);
    for (i, c) in field.cones.iter().enumerate() {
        if Some(i) == skip {
            continue;
        }
        let d = p.dist(c.position);
        if d < best.0 {
            best = (d, if c.class == ConeClass::Interior { Some(i) } else { None });
        }
    }
    for j in &field.junction_charges {
        let d = p.dist(j.position);
        if d < best.0 {
            best = (d, None);
        }
    }
    best
}

fn trace_inner(
    field: &PhiField,
    domain: &DomainSpec,
    start: Point,
    direction: f64,
    opts: &TraceOptions,
    mut skip: Option<usize>,
) -> Result<GeodesicPath, GeodesicError> {
    let diam = domain.diameter();
    let on_boundary = domain.boundary_distance(start) <= 1e-9 * diam;
    if !start.is_finite() || !(domain.contains(start) || on_boundary) {
        return Err(GeodesicError::InvalidStart { x: start.x, y: start.y });
    }
    field.eval_phi(start).map_err(|_| GeodesicError::InvalidStart { x: start.x, y: start.y })?;
    let mut y = State { p: start, theta: direction, s: 0.0, st: 0.0 };
    let mut samples = alloc::vec![sample(&y)];
    let mut first = true;
    let finish = |samples: Vec<GeodesicSample>, termination, captured| Ok(GeodesicPath { samples, termination, captured });
    loop {
        if let Some(i) = skip {
            if y.p.dist(field.cones[i].position) > 1.5 * opts.capture_radius {
                skip = None;
            }
        }
        let (dc, cone) = nearest_charge(field, y.p, skip);
        if dc < opts.capture_radius {
            return finish(samples, if cone.is_some() { Termination::ConeCapture } else { Termination::LeftDomain }, cone);
        }
        let g = field.eval_grad_phi(y.p)?.norm();
        let mut h = opts.h.min(opts.max_s - y.s);
        if g > 0.0 {
            h = h.min(0.1 / g);
        }
        h = h.min(0.5 * dc);
        let mut next = rk4(field, y, h)?;
        while (next.theta - y.theta).abs() > MAX_TURN && h > 1e-14 * diam {
            h *= 0.5;
            next = rk4(field, y, h)?;
        }
        if !domain.contains(next.p) {
            if first && on_boundary {
                samples.push(sample(&next));
                return finish(samples, Termination::LeftDomain, None);
            }
            let (mut lo, mut hi) = (0.0, h);
            while hi - lo > CROSSING_TOL {
                let mid = 0.5 * (lo + hi);
                if domain.contains(rk4(field, y, mid)?.p) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            samples.push(sample(&rk4(field, y, lo)?));
            return finish(samples, Termination::Boundary, None);
        }
        if next.st >= opts.max_s_tilde {
            let (mut lo, mut hi) = (0.0, h);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if rk4(field, y, mid)?.st < opts.max_s_tilde {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-15 * (1.0 + y.s) {
                    break;
                }
            }
            samples.push(sample(&rk4(field, y, 0.5 * (lo + hi))?));
            return finish(samples, Termination::MaxLength, None);
        }
        y = next;
        samples.push(sample(&y));
        first = false;
        if y.s >= opts.max_s * (1.0 - 1e-15) {
            return finish(samples, Termination::MaxLength, None);
        }
    }
}

/// A cross angle ψ ∈ [0, q) together with where it was seeded.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossSample {
    pub position: Point,
    pub psi: f64,
    pub base: Point,
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = b - a;
    let n2 = d.norm2();
    let t = if n2 > 0.0 { ((p - a).dot(d) / n2).clamp(0.0, 1.0) } else { 0.0 };
    p.dist(a + d * t)
}

fn charge_positions(field: &PhiField) -> Vec<Point> {
    field.cones.iter().map(|c| c.position).chain(field.junction_charges.iter().map(|j| j.position)).collect()
}

/// Cross angle at the end of `path`, seeded by the boundary tangent at `base`.
pub fn cross_angle(field: &PhiField, domain: &DomainSpec, base: BoundaryPoint, path: &[Point]) -> Result<CrossSample, GeodesicError> {
    let first = *path.first().ok_or(GeodesicError::PathStart)?;
    if first.dist(base.position) > 1e-9 * domain.diameter() {
        return Err(GeodesicError::PathStart);
    }
    let eps = field.eps();
    let charges = charge_positions(field);
    for w in path.windows(2) {
        for c in &charges {
            // The base itself may sit on a boundary charge.
            if c.dist(base.position) <= eps {
                continue;
            }
            if segment_distance(*c, w[0], w[1]) < eps {
                return Err(GeodesicError::Proximity { x: c.x, y: c.y, eps });
            }
        }
    }
    let psi0 = domain.segment(base.loop_index, base.segment).tangent_angle(base.s);
    let flux = field.normal_flux(path)?;
    Ok(CrossSample { position: path[path.len() - 1], psi: modulo(psi0 + flux, field.q()), base: base.position })
}

/// Base point and cross angle at `cone + r·(cos β₀, sin β₀)`.
fn probe_phase(field: &PhiField, domain: &DomainSpec, cone: Point, r: f64) -> Result<(f64, f64), GeodesicError> {
    let diam = domain.diameter();
    let clear = 0.02 * diam;
    let charges = charge_positions(field);
    let mut candidates = alloc::vec![domain.closest_boundary(cone).1];
    for (li, l) in domain.loops.iter().enumerate() {
        for (si, seg) in l.segments.iter().enumerate() {
            let n = ((seg.length() / (0.01 * diam)).ceil() as usize).max(2);
            for j in 0..n {
                let s = seg.length() * (j as f64 + 0.5) / n as f64;
                candidates.push(BoundaryPoint { loop_index: li, segment: si, s, position: seg.point_at(s) });
            }
        }
    }
    candidates[1..].sort_by(|a, b| a.position.dist(cone).total_cmp(&b.position.dist(cone)));
    for base in candidates {
        let b0 = (base.position - cone).angle();
        let probe = cone + Point::polar(r, b0);
        let blocked = charges
            .iter()
            .filter(|c| c.dist(cone) > 0.5 * r && c.dist(base.position) > field.eps())
            .any(|c| segment_distance(*c, base.position, probe) < clear);
        let inside = (1..8).all(|i| domain.contains(base.position.lerp(probe, i as f64 / 8.0)));
        if blocked || !inside {
            continue;
        }
        let cs = cross_angle(field, domain, base, &[base.position, probe])?;
        return Ok((b0, cs.psi));
    }
    Err(GeodesicError::Proximity { x: cone.x, y: cone.y, eps: clear })
}

/// Launch angles of the star geodesics of an interior cone: the directions β
/// where the radial ray agrees with the local cross, β ≡ ψ(β) mod q.
pub fn star_angles(field: &PhiField, domain: &DomainSpec, cone: &ConePoint, radius: f64) -> Result<Vec<f64>, GeodesicError> {
    if cone.class != ConeClass::Interior {
        return Err(GeodesicError::NotInterior);
    }
    let dirs = field.quantum.directions();
    let count = cone.k + dirs;
    if count <= 0 {
        return Err(GeodesicError::Valence { k: cone.k, directions: dirs });
    }
    let q = field.q();
    let c = cone.strength(q) / TAU;
    let (b0, psi0) = probe_phase(field, domain, cone.position, radius)?;
    // Around the circle ψ(β) = ψ₀ − c(β − β₀).
    let first = (psi0 + c * b0) / (1.0 + c);
    let step = q / (1.0 + c);
    let mut out: Vec<f64> = (0..count).map(|m| modulo(first + m as f64 * step, TAU)).collect();
    out.sort_by(f64::total_cmp);
    debug_assert!((step * count as f64 - TAU).abs() < 1e-9);
    Ok(out)
}

/// The k + 4 (k + 6 for triangles) geodesics leaving an interior cone.
pub fn star_geodesics(field: &PhiField, domain: &DomainSpec, cone_index: usize, opts: &TraceOptions) -> Result<Vec<GeodesicPath>, GeodesicError> {
    let cone = field.cones[cone_index];
    let r = opts.capture_radius;
    let angles = star_angles(field, domain, &cone, r)?;
    angles
        .into_iter()
        .map(|b| trace_inner(field, domain, cone.position + Point::polar(r, b), b, opts, Some(cone_index)))
        .collect()
}

/// ∫₀^s e^φ along a segment.
/// Cumulative manifold arclength ∫e^φ ds at the ends of equal panels.
struct ArclengthTable {
    panel: f64,
    cumulative: Vec<f64>,
}

const ARCLENGTH_PANELS: usize = 512;

impl ArclengthTable {
    fn new(field: &PhiField, seg: &CurveSegment) -> Self {
        let gl = GaussLegendre::new(6);
        let len = seg.length();
        let panel = len / ARCLENGTH_PANELS as f64;
        let mut cumulative = Vec::with_capacity(ARCLENGTH_PANELS + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for i in 0..ARCLENGTH_PANELS {
            let a = i as f64 * panel;
            acc += gl.integrate(a, a + panel, |t| density(field, seg, t));
            cumulative.push(acc);
        }
        ArclengthTable { panel, cumulative }
    }

    fn total(&self) -> f64 {
        self.cumulative[ARCLENGTH_PANELS]
    }

    /// Parameter s with L(s) = target, by Newton inside the bracketing panel.
    fn invert(&self, field: &PhiField, seg: &CurveSegment, target: f64) -> f64 {
        let i = self.cumulative.partition_point(|&c| c <= target).clamp(1, ARCLENGTH_PANELS) - 1;
        let (a, b) = (i as f64 * self.panel, (i + 1) as f64 * self.panel);
        let base = self.cumulative[i];
        let gl = GaussLegendre::new(6);
        let (mut lo, mut hi) = (a, b);
        let mut s = a + (b - a) * ((target - base) / (self.cumulative[i + 1] - base)).clamp(0.0, 1.0);
        for _ in 0..30 {
            let r = base + gl.integrate(a, s, |t| density(field, seg, t)) - target;
            if r.abs() <= 1e-13 * self.total().max(1.0) {
                break;
            }
            if r > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let e = density(field, seg, s);
            let next = s - r / e;
            s = if e > 0.0 && next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        }
        s
    }
}

fn density(field: &PhiField, seg: &CurveSegment, t: f64) -> f64 {
    field.eval_phi(seg.point_at(t)).map(f64::exp).unwrap_or(0.0)
}

/// Geodesics launched along the interior normal at manifold spacing `spacing`
/// from the start of a boundary segment. Launch points at the segment ends are
/// moved inward along the segment by 1e-6 of the diameter so that the path
/// does not run along the neighbouring boundary piece.
pub fn seed_boundary_family(
    field: &PhiField,
    domain: &DomainSpec,
    loop_index: usize,
    segment: usize,
    spacing: f64,
    opts: &TraceOptions,
) -> Result<Vec<GeodesicPath>, GeodesicError> {
    if !(spacing > 0.0) {
        return Err(GeodesicError::Spacing(spacing));
    }
    let seg = domain.segment(loop_index, segment);
    let len = seg.length();
    field.eval_phi(seg.point_at(0.5 * len))?;
    let table = ArclengthTable::new(field, seg);
    let total = table.total();
    let count = (total / spacing + 1e-9).floor() as usize + 1;
    let nudge = 1e-6 * domain.diameter();
    let mut out = Vec::with_capacity(count);
    for j in 0..count {
        let s = table.invert(field, seg, j as f64 * spacing);
        let sl = s.clamp(nudge, len - nudge);
        let p = seg.point_at(sl);
        let n = seg.normal(sl);
        out.push(trace_geodesic(field, domain, p, n.angle(), opts)?);
    }
    Ok(out)
}

/// Signed angle between two plane directions reduced to [−π, π).
pub fn angle_between(a: f64, b: f64) -> f64 {
    modulo(b - a + PI, TAU) - PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{disk, rectangle, Quantum, Sweep};
    use crate::geometry::BoundaryLoop;
    use crate::phi_field::{ClosedForm, HarmonicPart, LogTerm};
    use core::f64::consts::FRAC_PI_2;

    fn annulus() -> (DomainSpec, PhiField) {
        let o = Point::ZERO;
        let l = BoundaryLoop::new(alloc::vec![
            CurveSegment::line(Point::new(1.0, 0.0), Point::new(2.0, 0.0)),
            CurveSegment::arc(Point::new(2.0, 0.0), Point::new(0.0, 2.0), o, Sweep::Ccw).unwrap(),
            CurveSegment::line(Point::new(0.0, 2.0), Point::new(0.0, 1.0)),
            CurveSegment::arc(Point::new(0.0, 1.0), Point::new(1.0, 0.0), o, Sweep::Cw).unwrap(),
        ]);
        let d = DomainSpec::new(alloc::vec![l], Quantum::Quad).unwrap();
        let c = (10.0 / 2f64.ln()).ln();
        let f = PhiField::new(Quantum::Quad, d.diameter())
            .with_harmonic(HarmonicPart::Closed(ClosedForm { logs: alloc::vec![LogTerm { center: o, coeff: -1.0 }], linear: Point::ZERO }))
            .with_constant(c);
        (d, f)
    }

    #[test]
    fn flat_field_traces_straight_lines() {
        let d = rectangle(0.0, 0.0, 1.0, 1.0, Quantum::Quad);
        let f = PhiField::new(Quantum::Quad, d.diameter());
        let p = trace_geodesic(&f, &d, Point::new(0.2, 0.3), 0.4, &TraceOptions::for_domain(&d)).unwrap();
        assert_eq!(p.termination, Termination::Boundary);
        assert!(p.samples.iter().all(|s| (s.theta - 0.4).abs() < 1e-15));
        let e = p.end().position;
        assert!(d.boundary_distance(e) < 1e-9);
    }

    #[test]
    fn annulus_radial_and_circular() {
        let (d, f) = annulus();
        let opts = TraceOptions::for_domain(&d);
        let a = 0.6;
        let p = trace_geodesic(&f, &d, Point::polar(1.0, a), a, &opts).unwrap();
        assert!(p.samples.iter().all(|s| (s.theta - a).abs() < 1e-8));
        assert!((p.end().position.norm() - 2.0).abs() < 1e-8);
        // Manifold length of a radial line is e^C·ln 2 = 10.
        assert!((p.manifold_length() - 10.0).abs() < 1e-6, "{}", p.manifold_length());

        let r = 1.5;
        let p = trace_geodesic(&f, &d, Point::new(r, 0.0), FRAC_PI_2, &opts).unwrap();
        assert_eq!(p.termination, Termination::Boundary);
        let drift = p.samples.iter().map(|s| (s.position.norm() - r).abs()).fold(0.0, f64::max);
        assert!(drift < 1e-6, "{drift}");
    }

    #[test]
    fn traced_path_has_zero_tilde_kappa() {
        let (d, f) = annulus();
        let p = trace_geodesic(&f, &d, Point::new(1.2, 0.1), 1.0, &TraceOptions::for_domain(&d)).unwrap();
        let seg = p.to_segment().unwrap();
        let len = seg.length();
        for i in 1..20 {
            let tk = f.tilde_kappa(&seg, len * i as f64 / 20.0).unwrap();
            assert!(tk.abs() < 1e-6, "{tk}");
        }
    }

    #[test]
    fn annulus_family_from_radial_side() {
        let (d, f) = annulus();
        let fam = seed_boundary_family(&f, &d, 0, 0, 1.0, &TraceOptions::for_domain(&d)).unwrap();
        assert_eq!(fam.len(), 11);
        assert!(fam.iter().all(|p| p.termination == Termination::Boundary));
    }

    #[test]
    fn single_cone_star_counts() {
        let d = disk(Point::ZERO, 1.0, Quantum::Quad);
        for k in [-1, 0, 1, 2] {
            let f = PhiField::new(Quantum::Quad, 2.0).with_cone(ConePoint::interior(Point::ZERO, k));
            let paths = star_geodesics(&f, &d, 0, &TraceOptions::for_domain(&d)).unwrap();
            assert_eq!(paths.len(), (k + 4) as usize);
            let mut ang: Vec<f64> = paths.iter().map(|p| p.end().position.angle()).collect();
            ang.sort_by(f64::total_cmp);
            for i in 0..ang.len() {
                let gap = modulo(ang[(i + 1) % ang.len()] - ang[i], TAU);
                assert!((gap - TAU / (k + 4) as f64).abs() < 1e-3, "k={k} gap={gap}");
            }
        }
        let f = PhiField::new(Quantum::Quad, 2.0).with_cone(ConePoint::interior(Point::ZERO, -4));
        assert!(matches!(star_geodesics(&f, &d, 0, &TraceOptions::for_domain(&d)), Err(GeodesicError::Valence { .. })));
    }

    #[test]
    fn cross_rotates_with_polar_angle_on_annulus() {
        let (d, f) = annulus();
        let base = BoundaryPoint { loop_index: 0, segment: 3, s: 0.1, position: d.segment(0, 3).point_at(0.1) };
        let seg = d.segment(0, 3);
        let path: Vec<Point> = (0..=50).map(|i| seg.point_at(0.1 + 1.2 * i as f64 / 50.0)).collect();
        let cs = cross_angle(&f, &d, base, &path).unwrap();
        let expect = modulo(seg.tangent_angle(1.3), FRAC_PI_2);
        assert!(angle_between(cs.psi, expect).abs() < 1e-9 || (angle_between(cs.psi, expect).abs() - FRAC_PI_2).abs() < 1e-9);
    }
}
