//! Planar domains bounded by oriented loops of lines, circular arcs and polylines.
//!
//! Every loop is stored with the interior on its left: the outer loop runs
//! counter-clockwise and holes run clockwise. With T the unit tangent the normal
//! N = (−T_y, T_x) therefore points into the domain, and signed curvature
//! κ = dθ/ds is positive when the boundary turns toward N.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI, TAU};
use core::fmt;
use core::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

#[allow(unused_imports)]
use crate::math::Float;
use crate::math::{modulo, wrap_pi};

/// Tangent jumps above this (radians) mark a junction.
pub const JUNCTION_ANGLE_TOL: f64 = 1e-6;
/// Relative gap (in units of the domain diameter) tolerated between segment ends.
pub const CLOSURE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ZERO: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn polar(r: f64, angle: f64) -> Self {
        Point::new(r * angle.cos(), r * angle.sin())
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 2D cross product.
    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm2(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dist(self, o: Point) -> f64 {
        (self - o).norm()
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Rotation by +90°.
    pub fn perp(self) -> Point {
        Point::new(-self.y, self.x)
    }

    pub fn normalized(self) -> Point {
        let n = self.norm();
        Point::new(self.x / n, self.y / n)
    }

    pub fn lerp(self, o: Point, t: f64) -> Point {
        self + (o - self) * t
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Point {
    fn add_assign(&mut self, o: Point) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl SubAssign for Point {
    fn sub_assign(&mut self, o: Point) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl Div<f64> for Point {
    type Output = Point;
    fn div(self, s: f64) -> Point {
        Point::new(self.x / s, self.y / s)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Angle lattice of the cross field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantum {
    /// Quadrilateral crosses, q = π/2.
    Quad,
    /// Triangular crosses, q = π/3.
    Tri,
}

impl Quantum {
    pub fn value(self) -> f64 {
        match self {
            Quantum::Quad => FRAC_PI_2,
            Quantum::Tri => PI / 3.0,
        }
    }

    /// Number of directions in a cross: 2π/q.
    pub fn directions(self) -> i32 {
        match self {
            Quantum::Quad => 4,
            Quantum::Tri => 6,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Quantum::Quad => "quad",
            Quantum::Tri => "tri",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sweep {
    Ccw,
    Cw,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("arclength {s} outside [0, {len}]")]
    ParameterOutOfRange { s: f64, len: f64 },
    #[error("arc endpoints are not equidistant from the centre ({r0} vs {r1})")]
    ArcRadiusMismatch { r0: f64, r1: f64 },
    #[error("arc radius must be positive")]
    NonPositiveRadius,
    #[error("polyline needs at least two distinct points")]
    DegeneratePolyline,
    #[error("segment {segment} of loop {loop_index} has zero length")]
    ZeroLengthSegment { loop_index: usize, segment: usize },
    #[error("cusp at loop {loop_index}, segment {segment}: one-sided tangents are opposite")]
    Cusp { loop_index: usize, segment: usize },
    #[error("domain has no loops")]
    Empty,
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("invalid domain: {0}")]
    Invalid(String),
}

/// One C² piece of a boundary loop.
#[derive(Clone, Debug, PartialEq)]
pub enum CurveSegment {
    Line {
        a: Point,
        b: Point,
    },
    /// Circular arc starting at polar angle `start_angle` and turning by `sweep`
    /// radians (positive = counter-clockwise). `a`/`b` are the exact endpoints.
    Arc {
        center: Point,
        radius: f64,
        start_angle: f64,
        sweep: f64,
        a: Point,
        b: Point,
    },
    /// Sampled C² curve. Positions interpolate chords; tangent angle and
    /// curvature come from three-point circumcircles at the samples.
    Polyline {
        points: Vec<Point>,
        cumulative: Vec<f64>,
        angles: Vec<f64>,
        curvatures: Vec<f64>,
    },
}

impl CurveSegment {
    pub fn line(a: Point, b: Point) -> Self {
        CurveSegment::Line { a, b }
    }

    /// Arc from `start` to `end` around `center`. Equal endpoints give a full circle.
    pub fn arc(start: Point, end: Point, center: Point, sweep: Sweep) -> Result<Self, GeometryError> {
        let r0 = start.dist(center);
        let r1 = end.dist(center);
        if !(r0 > 0.0) {
            return Err(GeometryError::NonPositiveRadius);
        }
        if (r0 - r1).abs() > 1e-9 * r0 {
            return Err(GeometryError::ArcRadiusMismatch { r0, r1 });
        }
        let a0 = (start - center).angle();
        let a1 = (end - center).angle();
        let mut delta = match sweep {
            Sweep::Ccw => modulo(a1 - a0, TAU),
            Sweep::Cw => -modulo(a0 - a1, TAU),
        };
        if delta.abs() < 1e-12 || start == end {
            delta = match sweep {
                Sweep::Ccw => TAU,
                Sweep::Cw => -TAU,
            };
        }
        Ok(CurveSegment::Arc { center, radius: r0, start_angle: a0, sweep: delta, a: start, b: end })
    }

    /// Arc given by centre, radius, start angle and signed sweep.
    pub fn arc_polar(center: Point, radius: f64, start_angle: f64, sweep: f64) -> Result<Self, GeometryError> {
        if !(radius > 0.0) {
            return Err(GeometryError::NonPositiveRadius);
        }
        let a = center + Point::polar(radius, start_angle);
        let b = if sweep.abs() >= TAU { a } else { center + Point::polar(radius, start_angle + sweep) };
        Ok(CurveSegment::Arc { center, radius, start_angle, sweep, a, b })
    }

    pub fn polyline(points: Vec<Point>) -> Result<Self, GeometryError> {
        let mut pts: Vec<Point> = Vec::with_capacity(points.len());
        for p in points {
            if !p.is_finite() {
                return Err(GeometryError::NonFinite);
            }
            if pts.last().is_none_or(|q: &Point| *q != p) {
                pts.push(p);
            }
        }
        if pts.len() < 2 {
            return Err(GeometryError::DegeneratePolyline);
        }
        let mut cumulative = Vec::with_capacity(pts.len());
        cumulative.push(0.0);
        for w in pts.windows(2) {
            let last = *cumulative.last().unwrap();
            cumulative.push(last + w[0].dist(w[1]));
        }
        let n = pts.len();
        let mut angles = Vec::with_capacity(n);
        let mut curvatures = Vec::with_capacity(n);
        if n == 2 {
            let t = (pts[1] - pts[0]).angle();
            angles.extend([t, t]);
            curvatures.extend([0.0, 0.0]);
        } else {
            for i in 0..n {
                let j = i.clamp(1, n - 2);
                let (k, theta) = circle_tangent(pts[j - 1], pts[j], pts[j + 1], pts[i]);
                curvatures.push(k);
                angles.push(theta);
            }
            // Unwrap so linear interpolation between neighbours is meaningful.
            for i in 1..n {
                let d = wrap_pi(angles[i] - angles[i - 1]);
                angles[i] = angles[i - 1] + d;
            }
        }
        Ok(CurveSegment::Polyline { points: pts, cumulative, angles, curvatures })
    }

    /// Polyline with known tangent angles and curvatures at its samples, as
    /// produced by an ODE trace.
    pub fn polyline_with_frames(points: Vec<Point>, angles: Vec<f64>, curvatures: Vec<f64>) -> Result<Self, GeometryError> {
        if points.len() < 2 || angles.len() != points.len() || curvatures.len() != points.len() {
            return Err(GeometryError::DegeneratePolyline);
        }
        if points.iter().any(|p| !p.is_finite()) || angles.iter().chain(&curvatures).any(|x| !x.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let mut cumulative = Vec::with_capacity(points.len());
        cumulative.push(0.0);
        for w in points.windows(2) {
            if w[0] == w[1] {
                return Err(GeometryError::DegeneratePolyline);
            }
            let last = *cumulative.last().unwrap();
            cumulative.push(last + w[0].dist(w[1]));
        }
        let mut angles = angles;
        for i in 1..angles.len() {
            let d = wrap_pi(angles[i] - angles[i - 1]);
            angles[i] = angles[i - 1] + d;
        }
        Ok(CurveSegment::Polyline { points, cumulative, angles, curvatures })
    }

    pub fn length(&self) -> f64 {
        match self {
            CurveSegment::Line { a, b } => a.dist(*b),
            CurveSegment::Arc { radius, sweep, .. } => radius * sweep.abs(),
            CurveSegment::Polyline { cumulative, .. } => *cumulative.last().unwrap(),
        }
    }

    pub fn start(&self) -> Point {
        match self {
            CurveSegment::Line { a, .. } | CurveSegment::Arc { a, .. } => *a,
            CurveSegment::Polyline { points, .. } => points[0],
        }
    }

    pub fn end(&self) -> Point {
        match self {
            CurveSegment::Line { b, .. } | CurveSegment::Arc { b, .. } => *b,
            CurveSegment::Polyline { points, .. } => *points.last().unwrap(),
        }
    }

    fn polyline_locate(cumulative: &[f64], s: f64) -> (usize, f64) {
        let n = cumulative.len();
        let i = match cumulative.binary_search_by(|c| c.partial_cmp(&s).unwrap_or(core::cmp::Ordering::Less)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        };
        let span = cumulative[i + 1] - cumulative[i];
        let t = if span > 0.0 { ((s - cumulative[i]) / span).clamp(0.0, 1.0) } else { 0.0 };
        (i, t)
    }

    /// Position at arclength `s` (clamped to the segment).
    pub fn point_at(&self, s: f64) -> Point {
        match self {
            CurveSegment::Line { a, b } => {
                let l = a.dist(*b);
                if s >= l {
                    *b
                } else if s <= 0.0 {
                    *a
                } else {
                    a.lerp(*b, s / l)
                }
            }
            CurveSegment::Arc { center, radius, start_angle, sweep, a, b } => {
                let l = radius * sweep.abs();
                if s <= 0.0 {
                    *a
                } else if s >= l {
                    *b
                } else {
                    *center + Point::polar(*radius, start_angle + sweep.signum() * s / radius)
                }
            }
            CurveSegment::Polyline { points, cumulative, .. } => {
                let (i, t) = Self::polyline_locate(cumulative, s);
                points[i].lerp(points[i + 1], t)
            }
        }
    }

    /// Direction angle of the unit tangent at `s`.
    pub fn tangent_angle(&self, s: f64) -> f64 {
        match self {
            CurveSegment::Line { a, b } => (*b - *a).angle(),
            CurveSegment::Arc { radius, start_angle, sweep, .. } => {
                let l = radius * sweep.abs();
                let phi = start_angle + sweep.signum() * s.clamp(0.0, l) / radius;
                wrap_pi(phi + sweep.signum() * FRAC_PI_2)
            }
            CurveSegment::Polyline { cumulative, angles, .. } => {
                let (i, t) = Self::polyline_locate(cumulative, s);
                wrap_pi(angles[i] + t * (angles[i + 1] - angles[i]))
            }
        }
    }

    pub fn tangent(&self, s: f64) -> Point {
        Point::polar(1.0, self.tangent_angle(s))
    }

    /// Left normal N = (−T_y, T_x).
    pub fn normal(&self, s: f64) -> Point {
        self.tangent(s).perp()
    }

    /// Signed curvature, positive when turning left. Clamps `s`.
    pub fn curvature(&self, s: f64) -> f64 {
        match self {
            CurveSegment::Line { .. } => 0.0,
            CurveSegment::Arc { radius, sweep, .. } => sweep.signum() / radius,
            CurveSegment::Polyline { cumulative, curvatures, .. } => {
                let (i, t) = Self::polyline_locate(cumulative, s);
                curvatures[i] + t * (curvatures[i + 1] - curvatures[i])
            }
        }
    }

    /// Total turning ∫κ ds of the segment.
    pub fn total_turning(&self) -> f64 {
        match self {
            CurveSegment::Line { .. } => 0.0,
            CurveSegment::Arc { sweep, .. } => *sweep,
            CurveSegment::Polyline { angles, .. } => angles[angles.len() - 1] - angles[0],
        }
    }

    pub fn start_tangent(&self) -> Point {
        self.tangent(0.0)
    }

    pub fn end_tangent(&self) -> Point {
        self.tangent(self.length())
    }

    pub fn reversed(&self) -> CurveSegment {
        match self {
            CurveSegment::Line { a, b } => CurveSegment::Line { a: *b, b: *a },
            CurveSegment::Arc { center, radius, start_angle, sweep, a, b } => CurveSegment::Arc {
                center: *center,
                radius: *radius,
                start_angle: start_angle + sweep,
                sweep: -sweep,
                a: *b,
                b: *a,
            },
            CurveSegment::Polyline { points, .. } => {
                let mut p = points.clone();
                p.reverse();
                CurveSegment::polyline(p).expect("reversal keeps a valid polyline")
            }
        }
    }

    /// Signed area contribution ½∮(x dy − y dx).
    fn area_term(&self) -> f64 {
        match self {
            CurveSegment::Line { a, b } => 0.5 * a.cross(*b),
            CurveSegment::Arc { center, radius, sweep, a, b, .. } => {
                0.5 * (center.cross(*b - *a) + radius * radius * sweep)
            }
            CurveSegment::Polyline { points, .. } => points.windows(2).map(|w| 0.5 * w[0].cross(w[1])).sum(),
        }
    }

    /// Distance from `p` to the segment and the arclength of the closest point.
    pub fn closest(&self, p: Point) -> (f64, f64) {
        match self {
            CurveSegment::Line { a, b } => {
                let (d, t) = point_chord(p, *a, *b);
                (d, t * a.dist(*b))
            }
            CurveSegment::Arc { center, radius, start_angle, sweep, a, b } => {
                let v = p - *center;
                let rel = if *sweep >= 0.0 {
                    modulo(v.angle() - start_angle, TAU)
                } else {
                    modulo(start_angle - v.angle(), TAU)
                };
                if rel <= sweep.abs() && v.norm() > 0.0 {
                    ((v.norm() - radius).abs(), rel * radius)
                } else {
                    let da = p.dist(*a);
                    let db = p.dist(*b);
                    if da <= db {
                        (da, 0.0)
                    } else {
                        (db, self.length())
                    }
                }
            }
            CurveSegment::Polyline { points, cumulative, .. } => {
                let mut best = (f64::INFINITY, 0.0);
                for i in 0..points.len() - 1 {
                    let (d, t) = point_chord(p, points[i], points[i + 1]);
                    if d < best.0 {
                        best = (d, cumulative[i] + t * (cumulative[i + 1] - cumulative[i]));
                    }
                }
                best
            }
        }
    }

    /// Number of crossings of the ray from `p` toward +x, half-open in y so that
    /// pieces sharing an endpoint are counted once.
    fn ray_crossings(&self, p: Point) -> usize {
        match self {
            CurveSegment::Line { a, b } => chord_crossing(p, *a, *b) as usize,
            CurveSegment::Polyline { points, .. } => {
                points.windows(2).filter(|w| chord_crossing(p, w[0], w[1])).count()
            }
            CurveSegment::Arc { center, radius, start_angle, sweep, a, b } => {
                // Split into y-monotone pieces at the top and bottom of the circle.
                let (lo, hi) = if *sweep >= 0.0 {
                    (*start_angle, start_angle + sweep)
                } else {
                    (start_angle + sweep, *start_angle)
                };
                let (first, last) = if *sweep >= 0.0 { (*a, *b) } else { (*b, *a) };
                let mut cuts: Vec<(f64, Point)> = alloc::vec![(lo, first)];
                let mut m = ((lo - FRAC_PI_2) / PI).floor() + 1.0;
                loop {
                    let t = FRAC_PI_2 + m * PI;
                    if t >= hi {
                        break;
                    }
                    if t > lo {
                        cuts.push((t, *center + Point::polar(*radius, t)));
                    }
                    m += 1.0;
                }
                cuts.push((hi, last));
                let mut count = 0;
                for w in cuts.windows(2) {
                    let (t0, p0) = w[0];
                    let (t1, p1) = w[1];
                    if (p0.y > p.y) != (p1.y > p.y) {
                        let mid = 0.5 * (t0 + t1);
                        let dy = p.y - center.y;
                        let h = (radius * radius - dy * dy).max(0.0).sqrt();
                        let x = center.x + if mid.cos() >= 0.0 { h } else { -h };
                        if x > p.x {
                            count += 1;
                        }
                    }
                }
                count
            }
        }
    }

    /// Points along the segment with spacing at most `h` (endpoints included).
    pub fn sample(&self, h: f64) -> Vec<(f64, Point)> {
        let len = self.length();
        let n = ((len / h).ceil() as usize).max(1);
        (0..=n)
            .map(|i| {
                let s = len * i as f64 / n as f64;
                (s, self.point_at(s))
            })
            .collect()
    }

    /// Points suitable for polygonal approximations: arcs at ≤ 5° steps,
    /// polylines at their own vertices.
    pub fn polygonize(&self) -> Vec<Point> {
        match self {
            CurveSegment::Line { a, b } => alloc::vec![*a, *b],
            CurveSegment::Arc { sweep, .. } => {
                let n = ((sweep.abs() / (5.0f64).to_radians()).ceil() as usize).max(2);
                let len = self.length();
                (0..=n).map(|i| self.point_at(len * i as f64 / n as f64)).collect()
            }
            CurveSegment::Polyline { points, .. } => points.clone(),
        }
    }

    /// Checks `s` against the segment range before evaluating curvature.
    pub fn curvature_at(&self, s: f64) -> Result<f64, GeometryError> {
        let len = self.length();
        let slack = 1e-12 * len.max(1.0);
        if !(s >= -slack && s <= len + slack) {
            return Err(GeometryError::ParameterOutOfRange { s, len });
        }
        Ok(self.curvature(s))
    }
}

/// Signed curvature of the circle through a, b, c and its tangent angle at `at`
/// (oriented along a → b → c).
fn circle_tangent(a: Point, b: Point, c: Point, at: Point) -> (f64, f64) {
    let ab = b - a;
    let bc = c - b;
    let ac = c - a;
    let cr = ab.cross(bc);
    let denom = ab.norm() * bc.norm() * ac.norm();
    let k = if denom > 0.0 { 2.0 * cr / denom } else { 0.0 };
    if k.abs() < 1e-14 {
        return (0.0, ac.angle());
    }
    // Centre of the circle.
    let d = 2.0 * (a.x * (b.y - c.y) + b.x * (c.y - a.y) + c.x * (a.y - b.y));
    let (a2, b2, c2) = (a.norm2(), b.norm2(), c.norm2());
    let ux = (a2 * (b.y - c.y) + b2 * (c.y - a.y) + c2 * (a.y - b.y)) / d;
    let uy = (a2 * (c.x - b.x) + b2 * (a.x - c.x) + c2 * (b.x - a.x)) / d;
    let radial = at - Point::new(ux, uy);
    let t = if k > 0.0 { radial.perp() } else { -radial.perp() };
    (k, t.angle())
}

fn point_chord(p: Point, a: Point, b: Point) -> (f64, f64) {
    let d = b - a;
    let l2 = d.norm2();
    let t = if l2 > 0.0 { ((p - a).dot(d) / l2).clamp(0.0, 1.0) } else { 0.0 };
    (p.dist(a + d * t), t)
}

fn chord_crossing(p: Point, a: Point, b: Point) -> bool {
    if (a.y > p.y) != (b.y > p.y) {
        let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
        x > p.x
    } else {
        false
    }
}

/// Closed chain of segments with the interior on the left.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryLoop {
    pub segments: Vec<CurveSegment>,
}

impl BoundaryLoop {
    pub fn new(segments: Vec<CurveSegment>) -> Self {
        BoundaryLoop { segments }
    }

    pub fn length(&self) -> f64 {
        self.segments.iter().map(CurveSegment::length).sum()
    }

    /// Signed enclosed area (positive for counter-clockwise traversal).
    pub fn signed_area(&self) -> f64 {
        self.segments.iter().map(CurveSegment::area_term).sum()
    }

    pub fn reversed(&self) -> BoundaryLoop {
        BoundaryLoop { segments: self.segments.iter().rev().map(CurveSegment::reversed).collect() }
    }

    fn crossings(&self, p: Point) -> usize {
        self.segments.iter().map(|s| s.ray_crossings(p)).sum()
    }

    /// Point-in-loop test by crossing parity.
    pub fn encloses(&self, p: Point) -> bool {
        self.crossings(p) % 2 == 1
    }

    pub fn polygonize(&self) -> Vec<Point> {
        let mut out = Vec::new();
        for seg in &self.segments {
            let pts = seg.polygonize();
            let skip = usize::from(!out.is_empty());
            out.extend(pts.into_iter().skip(skip));
        }
        out
    }

    /// A point strictly inside the loop: the centroid of its largest ear.
    pub fn interior_point(&self) -> Option<Point> {
        let mut poly = self.polygonize();
        if poly.len() > 1 && poly[0] == poly[poly.len() - 1] {
            poly.pop();
        }
        if self.signed_area() < 0.0 {
            poly.reverse();
        }
        let area = |t: &[Point; 3]| (t[1] - t[0]).cross(t[2] - t[0]).abs();
        ear_clip(&poly).iter().max_by(|a, b| area(a).total_cmp(&area(b))).map(|t| (t[0] + t[1] + t[2]) * (1.0 / 3.0))
    }
}

/// A tangent-discontinuous vertex of a boundary loop.
#[derive(Clone, Debug, PartialEq)]
pub struct JunctionInfo {
    pub position: Point,
    /// Inner angle θ_in ∈ (0, 2π); π − (exterior turning angle).
    pub theta_in: f64,
    pub loop_index: usize,
    /// Segment arriving at the junction.
    pub incoming: usize,
    /// Segment leaving the junction.
    pub outgoing: usize,
    /// Direction angle of the arriving tangent.
    pub tangent_in: f64,
    /// Direction angle of the departing tangent.
    pub tangent_out: f64,
}

impl JunctionInfo {
    /// Exterior turning angle π − θ_in.
    pub fn turning(&self) -> f64 {
        PI - self.theta_in
    }
}

/// Address of a point on the boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryPoint {
    pub loop_index: usize,
    pub segment: usize,
    pub s: f64,
    pub position: Point,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DomainSpec {
    /// Loop 0 is the outer boundary; the rest are holes.
    pub loops: Vec<BoundaryLoop>,
    pub quantum: Quantum,
    pub junctions: Vec<JunctionInfo>,
    diameter: f64,
}

impl DomainSpec {
    /// Orders loops (largest enclosed area first), fixes orientation so the
    /// interior is on the left, and derives the junctions.
    pub fn new(loops: Vec<BoundaryLoop>, quantum: Quantum) -> Result<Self, GeometryError> {
        if loops.is_empty() {
            return Err(GeometryError::Empty);
        }
        for (li, l) in loops.iter().enumerate() {
            if l.segments.is_empty() {
                return Err(GeometryError::Invalid(alloc::format!("loop {li} has no segments")));
            }
            for (si, s) in l.segments.iter().enumerate() {
                if !(s.start().is_finite() && s.end().is_finite()) {
                    return Err(GeometryError::NonFinite);
                }
                if !(s.length() > 0.0) {
                    return Err(GeometryError::ZeroLengthSegment { loop_index: li, segment: si });
                }
            }
        }
        let outer = loops
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.signed_area().abs().total_cmp(&b.1.signed_area().abs()))
            .map(|(i, _)| i)
            .unwrap();
        let mut ordered = Vec::with_capacity(loops.len());
        for (i, l) in loops.into_iter().enumerate() {
            let a = l.signed_area();
            let fixed = if (i == outer) == (a > 0.0) { l } else { l.reversed() };
            if i == outer {
                ordered.insert(0, fixed);
            } else {
                ordered.push(fixed);
            }
        }
        let junctions = compute_junctions(&ordered)?;
        let diameter = polygon_diameter(&ordered[0].polygonize());
        Ok(DomainSpec { loops: ordered, quantum, junctions, diameter })
    }

    /// As [`DomainSpec::new`] but rejects domains with diagnostics.
    pub fn validated(loops: Vec<BoundaryLoop>, quantum: Quantum) -> Result<Self, GeometryError> {
        let d = DomainSpec::new(loops, quantum)?;
        let diags = validate_domain(&d);
        if let Some(first) = diags.first() {
            return Err(GeometryError::Invalid(alloc::format!("{first}")));
        }
        Ok(d)
    }

    pub fn q(&self) -> f64 {
        self.quantum.value()
    }

    /// Largest distance between two points of the outer boundary.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn segment(&self, loop_index: usize, segment: usize) -> &CurveSegment {
        &self.loops[loop_index].segments[segment]
    }

    pub fn contains(&self, p: Point) -> bool {
        self.loops.iter().map(|l| l.crossings(p)).sum::<usize>() % 2 == 1
    }

    /// Distance to the nearest boundary point and its address.
    pub fn closest_boundary(&self, p: Point) -> (f64, BoundaryPoint) {
        let mut best = (f64::INFINITY, BoundaryPoint { loop_index: 0, segment: 0, s: 0.0, position: p });
        for (li, l) in self.loops.iter().enumerate() {
            for (si, seg) in l.segments.iter().enumerate() {
                let (d, s) = seg.closest(p);
                if d < best.0 {
                    best = (d, BoundaryPoint { loop_index: li, segment: si, s, position: seg.point_at(s) });
                }
            }
        }
        best
    }

    pub fn boundary_distance(&self, p: Point) -> f64 {
        self.closest_boundary(p).0
    }

    /// Axis-aligned bounding box of the outer loop: (min, max).
    pub fn bbox(&self) -> (Point, Point) {
        let pts = self.loops[0].polygonize();
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in pts {
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        (lo, hi)
    }

    /// Area enclosed by the domain (outer area minus holes).
    pub fn area(&self) -> f64 {
        self.loops.iter().map(BoundaryLoop::signed_area).sum()
    }

    pub fn is_junction_vertex(&self, loop_index: usize, segment_start: usize) -> bool {
        self.junctions.iter().any(|j| j.loop_index == loop_index && j.outgoing == segment_start)
    }
}

fn compute_junctions(loops: &[BoundaryLoop]) -> Result<Vec<JunctionInfo>, GeometryError> {
    let mut out = Vec::new();
    for (li, l) in loops.iter().enumerate() {
        let n = l.segments.len();
        for i in 0..n {
            let prev = (i + n - 1) % n;
            let gap = l.segments[prev].end().dist(l.segments[i].start());
            if gap > 1e-9 * l.segments[i].length().max(l.segments[prev].length()) {
                // Open loop: reported by validate_domain, no junction here.
                continue;
            }
            let t_in = l.segments[prev].end_tangent();
            let t_out = l.segments[i].start_tangent();
            let tau = t_in.cross(t_out).atan2(t_in.dot(t_out));
            if tau.abs() <= JUNCTION_ANGLE_TOL {
                continue;
            }
            if PI - tau.abs() <= JUNCTION_ANGLE_TOL {
                return Err(GeometryError::Cusp { loop_index: li, segment: i });
            }
            out.push(JunctionInfo {
                position: l.segments[i].start(),
                theta_in: PI - tau,
                loop_index: li,
                incoming: prev,
                outgoing: i,
                tangent_in: t_in.angle(),
                tangent_out: t_out.angle(),
            });
        }
    }
    Ok(out)
}

fn polygon_diameter(pts: &[Point]) -> f64 {
    let stride = pts.len().div_ceil(512).max(1);
    let sub: Vec<Point> = pts.iter().step_by(stride).copied().collect();
    let mut d: f64 = 0.0;
    for i in 0..sub.len() {
        for j in i + 1..sub.len() {
            d = d.max(sub[i].dist(sub[j]));
        }
    }
    d
}

/// Tangent-discontinuous vertices with their inner angles.
pub fn junction_angles(domain: &DomainSpec) -> Result<Vec<JunctionInfo>, GeometryError> {
    compute_junctions(&domain.loops)
}

/// Signed curvature at arclength `s` of a segment.
pub fn curvature_at(segment: &CurveSegment, s: f64) -> Result<f64, GeometryError> {
    segment.curvature_at(s)
}

/// A structural problem found by [`validate_domain`].
#[derive(Clone, Debug, PartialEq)]
pub enum Diagnostic {
    LoopNotClosed { loop_index: usize, segment: usize, gap: f64 },
    SelfIntersection { loop_a: usize, segment_a: usize, loop_b: usize, segment_b: usize },
    HoleOutsideOuter { loop_index: usize },
    HoleInsideHole { loop_index: usize, container: usize },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::LoopNotClosed { loop_index, segment, gap } => {
                write!(f, "loop not closed: loop {loop_index} gap {gap:e} after segment {segment}")
            }
            Diagnostic::SelfIntersection { loop_a, segment_a, loop_b, segment_b } => write!(
                f,
                "self-intersection between loop {loop_a} segment {segment_a} and loop {loop_b} segment {segment_b}"
            ),
            Diagnostic::HoleOutsideOuter { loop_index } => {
                write!(f, "hole containment violated: loop {loop_index} is outside the outer loop")
            }
            Diagnostic::HoleInsideHole { loop_index, container } => {
                write!(f, "hole containment violated: loop {loop_index} lies inside hole {container}")
            }
        }
    }
}

/// Open loops, crossing segments and misplaced holes. Never fails.
pub fn validate_domain(domain: &DomainSpec) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let tol = CLOSURE_TOL * domain.diameter().max(f64::MIN_POSITIVE);
    for (li, l) in domain.loops.iter().enumerate() {
        let n = l.segments.len();
        for i in 0..n {
            let gap = l.segments[i].end().dist(l.segments[(i + 1) % n].start());
            if gap > tol {
                diags.push(Diagnostic::LoopNotClosed { loop_index: li, segment: i, gap });
            }
        }
    }
    // Chords labelled (loop, segment, index within loop chain).
    struct Chord {
        a: Point,
        b: Point,
        lp: usize,
        seg: usize,
        idx: usize,
    }
    let mut chords = Vec::new();
    let mut loop_len = Vec::new();
    for (li, l) in domain.loops.iter().enumerate() {
        let mut idx = 0;
        for (si, seg) in l.segments.iter().enumerate() {
            for w in seg.polygonize().windows(2) {
                chords.push(Chord { a: w[0], b: w[1], lp: li, seg: si, idx });
                idx += 1;
            }
        }
        loop_len.push(idx);
    }
    let mut seen: Vec<(usize, usize, usize, usize)> = Vec::new();
    for i in 0..chords.len() {
        for j in i + 1..chords.len() {
            let (c, d) = (&chords[i], &chords[j]);
            if c.lp == d.lp {
                let m = loop_len[c.lp];
                let diff = d.idx.abs_diff(c.idx);
                if diff <= 1 || diff == m - 1 {
                    continue;
                }
            }
            if chords_intersect(c.a, c.b, d.a, d.b) {
                let key = (c.lp, c.seg, d.lp, d.seg);
                if !seen.contains(&key) {
                    seen.push(key);
                    diags.push(Diagnostic::SelfIntersection {
                        loop_a: c.lp,
                        segment_a: c.seg,
                        loop_b: d.lp,
                        segment_b: d.seg,
                    });
                }
            }
        }
    }
    for li in 1..domain.loops.len() {
        let probe = domain.loops[li].segments[0].start();
        if !domain.loops[0].encloses(probe) {
            diags.push(Diagnostic::HoleOutsideOuter { loop_index: li });
        }
        for lj in 1..domain.loops.len() {
            if lj != li && domain.loops[lj].encloses(probe) {
                diags.push(Diagnostic::HoleInsideHole { loop_index: li, container: lj });
            }
        }
    }
    diags
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b - a).cross(c - a)
}

fn chords_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let (lo1, hi1) = (Point::new(a.x.min(b.x), a.y.min(b.y)), Point::new(a.x.max(b.x), a.y.max(b.y)));
    let (lo2, hi2) = (Point::new(c.x.min(d.x), c.y.min(d.y)), Point::new(c.x.max(d.x), c.y.max(d.y)));
    if hi1.x < lo2.x || hi2.x < lo1.x || hi1.y < lo2.y || hi2.y < lo1.y {
        return false;
    }
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |p: Point, q: Point, r: Point, o: f64| {
        o == 0.0 && r.x >= p.x.min(q.x) && r.x <= p.x.max(q.x) && r.y >= p.y.min(q.y) && r.y <= p.y.max(q.y)
    };
    on(c, d, a, d1) || on(c, d, b, d2) || on(a, b, c, d3) || on(a, b, d, d4)
}

/// Ear-clipping triangulation of a simple counter-clockwise polygon.
pub(crate) fn ear_clip(poly: &[Point]) -> Vec<[Point; 3]> {
    let mut idx: Vec<usize> = (0..poly.len()).collect();
    let mut out = Vec::with_capacity(poly.len().saturating_sub(2));
    let inside = |p: Point, a: Point, b: Point, c: Point| orient(a, b, p) >= 0.0 && orient(b, c, p) >= 0.0 && orient(c, a, p) >= 0.0;
    let mut guard = 0;
    while idx.len() > 3 && guard < 4 * poly.len() * poly.len() {
        guard += 1;
        let n = idx.len();
        let mut clipped = false;
        for i in 0..n {
            let (ia, ib, ic) = (idx[(i + n - 1) % n], idx[i], idx[(i + 1) % n]);
            let (a, b, c) = (poly[ia], poly[ib], poly[ic]);
            if orient(a, b, c) <= 0.0 {
                continue;
            }
            let blocked = idx.iter().any(|&j| j != ia && j != ib && j != ic && inside(poly[j], a, b, c));
            if !blocked {
                out.push([a, b, c]);
                idx.remove(i);
                clipped = true;
                break;
            }
        }
        if !clipped {
            // Degenerate remainder (collinear runs): drop the flattest vertex.
            let n = idx.len();
            let i = (0..n)
                .min_by(|&i, &j| {
                    let f = |i: usize| orient(poly[idx[(i + n - 1) % n]], poly[idx[i]], poly[idx[(i + 1) % n]]).abs();
                    f(i).total_cmp(&f(j))
                })
                .unwrap();
            idx.remove(i);
        }
    }
    if idx.len() == 3 && orient(poly[idx[0]], poly[idx[1]], poly[idx[2]]) > 0.0 {
        out.push([poly[idx[0]], poly[idx[1]], poly[idx[2]]]);
    }
    out
}

/// Closed polygon loop through the given vertices (straight edges).
pub fn polygon_loop(vertices: &[Point]) -> BoundaryLoop {
    let n = vertices.len();
    BoundaryLoop::new((0..n).map(|i| CurveSegment::line(vertices[i], vertices[(i + 1) % n])).collect())
}

/// Axis-aligned rectangle [x0, x1] × [y0, y1].
pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64, quantum: Quantum) -> DomainSpec {
    let l = polygon_loop(&[Point::new(x0, y0), Point::new(x1, y0), Point::new(x1, y1), Point::new(x0, y1)]);
    DomainSpec::new(alloc::vec![l], quantum).expect("rectangle is a valid domain")
}

/// Disk of radius `r` centred at `c` as a single full-circle arc.
pub fn disk(c: Point, r: f64, quantum: Quantum) -> DomainSpec {
    let seg = CurveSegment::arc_polar(c, r, 0.0, TAU).expect("positive radius");
    DomainSpec::new(alloc::vec![BoundaryLoop::new(alloc::vec![seg])], quantum).expect("disk is a valid domain")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ear_clip_covers_l_shape() {
        let l = [
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(2.0, 1.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 2.0),
            Point::new(0.0, 2.0),
        ];
        let tris = ear_clip(&l);
        assert_eq!(tris.len(), 4);
        let a: f64 = tris.iter().map(|[a, b, c]| 0.5 * (*b - *a).cross(*c - *a)).sum();
        assert!((a - 3.0).abs() < 1e-14);
    }

    #[test]
    fn interior_point_of_clockwise_hole() {
        let hole = polygon_loop(&[Point::new(1.0, 0.0), Point::new(0.0, -1.0), Point::new(-1.0, 0.0), Point::new(0.0, 1.0)]);
        assert!(hole.signed_area() < 0.0);
        let p = hole.interior_point().unwrap();
        assert!(hole.encloses(p));
        let ring = BoundaryLoop::new(alloc::vec![CurveSegment::arc_polar(Point::new(3.0, 1.0), 0.5, 0.0, -TAU).unwrap()]);
        assert!(ring.interior_point().unwrap().dist(Point::new(3.0, 1.0)) < 0.5);
    }

    fn annulus_sector() -> DomainSpec {
        let r1 = 1.0;
        let r2 = 2.0;
        let a = FRAC_PI_2;
        let segs = alloc::vec![
            CurveSegment::line(Point::new(r1, 0.0), Point::new(r2, 0.0)),
            CurveSegment::arc_polar(Point::ZERO, r2, 0.0, a).unwrap(),
            CurveSegment::line(Point::polar(r2, a), Point::polar(r1, a)),
            CurveSegment::arc_polar(Point::ZERO, r1, a, -a).unwrap(),
        ];
        DomainSpec::new(alloc::vec![BoundaryLoop::new(segs)], Quantum::Quad).unwrap()
    }

    #[test]
    fn line_curvature_is_zero() {
        let s = CurveSegment::line(Point::new(0.0, 0.0), Point::new(2.0, 1.0));
        assert_eq!(curvature_at(&s, 0.7).unwrap(), 0.0);
        assert!(matches!(curvature_at(&s, 3.0), Err(GeometryError::ParameterOutOfRange { .. })));
    }

    #[test]
    fn annulus_arc_curvatures_follow_left_normal_convention() {
        let d = annulus_sector();
        let outer = d.segment(0, 1);
        let inner = d.segment(0, 3);
        assert!((outer.curvature_at(0.3).unwrap() - 0.5).abs() < 1e-15);
        // The inner arc runs clockwise: it turns away from N, so κ = −1/R₁.
        assert!((inner.curvature_at(0.3).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn rectangle_junctions() {
        let d = rectangle(0.0, 0.0, 2.0, 1.0, Quantum::Quad);
        assert_eq!(d.junctions.len(), 4);
        let turns: f64 = d.junctions.iter().map(JunctionInfo::turning).sum();
        assert!((turns - TAU).abs() < 1e-12);
        for j in &d.junctions {
            assert!((j.theta_in - FRAC_PI_2).abs() < 1e-12);
        }
    }

    #[test]
    fn wedge_junction_angle() {
        let a = PI / 3.0;
        let segs = alloc::vec![
            CurveSegment::line(Point::ZERO, Point::new(1.0, 0.0)),
            CurveSegment::arc_polar(Point::ZERO, 1.0, 0.0, a).unwrap(),
            CurveSegment::line(Point::polar(1.0, a), Point::ZERO),
        ];
        let d = DomainSpec::new(alloc::vec![BoundaryLoop::new(segs)], Quantum::Quad).unwrap();
        let apex: Vec<_> = d.junctions.iter().filter(|j| j.position == Point::ZERO).collect();
        assert_eq!(apex.len(), 1);
        assert!((apex[0].theta_in - a).abs() < 1e-12);
        // The two arc corners are right angles.
        assert_eq!(d.junctions.len(), 3);
    }

    #[test]
    fn annulus_sector_junction_angles_sum() {
        let d = annulus_sector();
        assert_eq!(d.junctions.len(), 4);
        let s: f64 = d.junctions.iter().map(|j| j.theta_in).sum();
        assert!((s - TAU).abs() < 1e-12);
    }

    #[test]
    fn orientation_is_normalized() {
        let cw = polygon_loop(&[Point::new(0.0, 0.0), Point::new(0.0, 1.0), Point::new(1.0, 1.0), Point::new(1.0, 0.0)]);
        let hole_ccw = polygon_loop(&[
            Point::new(0.4, 0.4),
            Point::new(0.6, 0.4),
            Point::new(0.6, 0.6),
            Point::new(0.4, 0.6),
        ]);
        let d = DomainSpec::new(alloc::vec![hole_ccw, cw], Quantum::Quad).unwrap();
        assert!(d.loops[0].signed_area() > 0.0);
        assert!(d.loops[1].signed_area() < 0.0);
        assert!((d.area() - 0.96).abs() < 1e-12);
        assert!(d.contains(Point::new(0.2, 0.5)));
        assert!(!d.contains(Point::new(0.5, 0.5)));
        assert!(validate_domain(&d).is_empty());
    }

    #[test]
    fn validate_reports_open_loop_and_hole_outside() {
        let mut l = polygon_loop(&[Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 1.0), Point::new(0.0, 1.0)]);
        l.segments.pop();
        let d = DomainSpec::new(alloc::vec![l.clone()], Quantum::Quad).unwrap();
        let diags = validate_domain(&d);
        assert!(diags.iter().any(|g| matches!(g, Diagnostic::LoopNotClosed { .. })));
        assert!(alloc::format!("{}", diags[0]).starts_with("loop not closed"));

        let outer = polygon_loop(&[Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 1.0), Point::new(0.0, 1.0)]);
        let hole = polygon_loop(&[Point::new(2.0, 0.0), Point::new(2.0, 0.5), Point::new(2.5, 0.5)]);
        let d = DomainSpec::new(alloc::vec![outer, hole], Quantum::Quad).unwrap();
        let diags = validate_domain(&d);
        assert_eq!(diags, alloc::vec![Diagnostic::HoleOutsideOuter { loop_index: 1 }]);
        assert!(alloc::format!("{}", diags[0]).starts_with("hole containment violated"));
    }

    #[test]
    fn validate_reports_bow_tie() {
        let l = polygon_loop(&[Point::new(0.0, 0.0), Point::new(1.0, 1.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)]);
        let d = DomainSpec::new(alloc::vec![l], Quantum::Quad).unwrap();
        assert!(validate_domain(&d).iter().any(|g| matches!(g, Diagnostic::SelfIntersection { .. })));
    }

    #[test]
    fn arc_crossings_match_disk() {
        let d = disk(Point::new(0.3, -0.2), 1.5, Quantum::Quad);
        for &(x, y) in &[(0.3, -0.2), (1.7, -0.2), (0.3, 1.29), (-1.19, -0.2), (0.3, -1.69)] {
            assert!(d.contains(Point::new(x, y)), "{x} {y}");
        }
        for &(x, y) in &[(1.81, -0.2), (0.3, 1.31), (-1.21, -0.2), (1.4, 0.9)] {
            assert!(!d.contains(Point::new(x, y)), "{x} {y}");
        }
        assert!((d.diameter() - 3.0).abs() < 1e-9);
        assert!(d.junctions.is_empty());
    }

    #[test]
    fn polyline_curvature_of_sampled_circle() {
        let pts: Vec<Point> = (0..=200).map(|i| Point::polar(2.0, PI * i as f64 / 200.0)).collect();
        let s = CurveSegment::polyline(pts).unwrap();
        let k = s.curvature_at(1.3).unwrap();
        assert!((k - 0.5).abs() < 1e-9);
        let t = s.tangent_angle(0.0);
        assert!((t - FRAC_PI_2).abs() < 1e-9);
        assert!((s.total_turning() - PI).abs() < 1e-9);
    }
}
