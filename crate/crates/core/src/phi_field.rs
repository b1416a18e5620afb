//! The composite conformal factor φ = φ_L + Σ (Q_i/2π)·ln|r − p_i| + C.
//!
//! Normal derivatives use the left normal N of the curve in question; on
//! boundary loops this points into the domain.

use alloc::vec::Vec;
use core::f64::consts::TAU;

use log::warn;

use crate::background_solver::NodalField;
use crate::geometry::{ear_clip, BoundaryLoop, CurveSegment, GeometryError, Point, Quantum};
#[allow(unused_imports)]
use crate::math::{subtended, Float};
use crate::quadrature::{adaptive, gauss_jacobi_01, GaussLegendre, TRI7};

/// Evaluation guard around charges, as a fraction of the domain diameter.
pub const EPS_CONE_FACTOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PhiError {
    #[error("point ({x}, {y}) lies within {eps:e} of a charge")]
    TooClose { x: f64, y: f64, eps: f64 },
    #[error("point ({x}, {y}) is outside the background mesh")]
    OutsideMesh { x: f64, y: f64 },
    #[error("cell size must be positive, got {0}")]
    NonPositiveSize(f64),
    #[error("non-finite field value at ({x}, {y})")]
    NonFinite { x: f64, y: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConeClass {
    Interior,
    Boundary,
    Junction,
}

impl ConeClass {
    pub fn name(self) -> &'static str {
        match self {
            ConeClass::Interior => "interior",
            ConeClass::Boundary => "boundary",
            ConeClass::Junction => "junction",
        }
    }
}

/// A cone point with integer index k.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConePoint {
    pub position: Point,
    pub k: i32,
    pub class: ConeClass,
}

impl ConePoint {
    pub fn interior(position: Point, k: i32) -> Self {
        ConePoint { position, k, class: ConeClass::Interior }
    }

    pub fn boundary(position: Point, k: i32) -> Self {
        ConePoint { position, k, class: ConeClass::Boundary }
    }

    /// Charge Q. A smooth boundary point sees half the turning of an interior
    /// point, so the same index carries twice the strength there.
    pub fn strength(&self, q: f64) -> f64 {
        match self.class {
            ConeClass::Interior => self.k as f64 * q,
            ConeClass::Boundary | ConeClass::Junction => 2.0 * self.k as f64 * q,
        }
    }
}

/// Real-valued charge sitting on a junction vertex.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JunctionCharge {
    pub position: Point,
    pub theta_in: f64,
    /// Lattice index n the charge was built for.
    pub n: i64,
    pub strength: f64,
}

/// A logarithmic term c·ln|r − center|.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogTerm {
    pub center: Point,
    pub coeff: f64,
}

/// Closed-form harmonic function Σ c_j·ln|r − a_j| + g·r.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ClosedForm {
    pub logs: Vec<LogTerm>,
    pub linear: Point,
}

impl ClosedForm {
    pub fn value(&self, p: Point) -> f64 {
        self.logs.iter().map(|t| t.coeff * (p - t.center).norm().ln()).sum::<f64>() + self.linear.dot(p)
    }

    pub fn gradient(&self, p: Point) -> Point {
        let mut g = self.linear;
        for t in &self.logs {
            let d = p - t.center;
            g += d * (t.coeff / d.norm2());
        }
        g
    }
}

/// The regular part φ_L.
#[derive(Clone, Debug)]
pub enum HarmonicPart {
    Zero,
    Nodal(NodalField),
    Closed(ClosedForm),
}

/// A charge as seen by the evaluator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Charge {
    pub position: Point,
    pub strength: f64,
    pub class: ConeClass,
}

impl Charge {
    pub fn coeff(&self) -> f64 {
        self.strength / TAU
    }
}

/// Value of a region integral that may diverge at a strongly negative charge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AreaValue {
    Finite(f64),
    Divergent,
}

impl AreaValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            AreaValue::Finite(v) => Some(v),
            AreaValue::Divergent => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PhiField {
    pub quantum: Quantum,
    pub cones: Vec<ConePoint>,
    pub junction_charges: Vec<JunctionCharge>,
    pub harmonic: HarmonicPart,
    pub constant: f64,
    /// Length scale for proximity guards.
    pub diameter: f64,
}

impl PhiField {
    /// φ ≡ 0.
    pub fn new(quantum: Quantum, diameter: f64) -> Self {
        PhiField {
            quantum,
            cones: Vec::new(),
            junction_charges: Vec::new(),
            harmonic: HarmonicPart::Zero,
            constant: 0.0,
            diameter,
        }
    }

    pub fn with_cone(mut self, cone: ConePoint) -> Self {
        let floor = -quantum_directions(self.quantum);
        if cone.k <= floor {
            warn!("cone index {} at ({}, {}) gives unbounded area", cone.k, cone.position.x, cone.position.y);
        } else if !(-1..=2).contains(&cone.k) {
            warn!("cone index {} is outside the practical range [-1, 2]", cone.k);
        }
        self.cones.push(cone);
        self
    }

    pub fn with_junction_charge(mut self, j: JunctionCharge) -> Self {
        self.junction_charges.push(j);
        self
    }

    pub fn with_harmonic(mut self, h: HarmonicPart) -> Self {
        self.harmonic = h;
        self
    }

    pub fn with_constant(mut self, c: f64) -> Self {
        self.constant = c;
        self
    }

    pub fn q(&self) -> f64 {
        self.quantum.value()
    }

    pub fn eps(&self) -> f64 {
        EPS_CONE_FACTOR * self.diameter
    }

    /// Cone and junction charges with their strengths.
    pub fn charges(&self) -> Vec<Charge> {
        let q = self.q();
        let mut out: Vec<Charge> = self
            .cones
            .iter()
            .map(|c| Charge { position: c.position, strength: c.strength(q), class: c.class })
            .collect();
        out.extend(self.junction_charges.iter().map(|j| Charge {
            position: j.position,
            strength: j.strength,
            class: ConeClass::Junction,
        }));
        out
    }

    fn check_proximity(&self, p: Point) -> Result<(), PhiError> {
        let eps = self.eps();
        let near = |c: Point| p.dist(c) < eps;
        if self.cones.iter().any(|c| near(c.position)) || self.junction_charges.iter().any(|j| near(j.position)) {
            return Err(PhiError::TooClose { x: p.x, y: p.y, eps });
        }
        Ok(())
    }

    /// Σ (Q_i/2π)·ln|p − p_i| without the proximity guard.
    pub fn singular_value(&self, p: Point) -> f64 {
        self.charges().iter().map(|c| c.coeff() * (p - c.position).norm().ln()).sum()
    }

    pub fn singular_gradient(&self, p: Point) -> Point {
        let mut g = Point::ZERO;
        for c in self.charges() {
            let d = p - c.position;
            g += d * (c.coeff() / d.norm2());
        }
        g
    }

    pub fn harmonic_value(&self, p: Point) -> Result<f64, PhiError> {
        match &self.harmonic {
            HarmonicPart::Zero => Ok(0.0),
            HarmonicPart::Closed(c) => Ok(c.value(p)),
            HarmonicPart::Nodal(n) => n.value(p).ok_or(PhiError::OutsideMesh { x: p.x, y: p.y }),
        }
    }

    pub fn harmonic_gradient(&self, p: Point) -> Result<Point, PhiError> {
        match &self.harmonic {
            HarmonicPart::Zero => Ok(Point::ZERO),
            HarmonicPart::Closed(c) => Ok(c.gradient(p)),
            HarmonicPart::Nodal(n) => n.gradient(p).ok_or(PhiError::OutsideMesh { x: p.x, y: p.y }),
        }
    }

    pub fn eval_phi(&self, p: Point) -> Result<f64, PhiError> {
        self.check_proximity(p)?;
        let v = self.singular_value(p) + self.harmonic_value(p)? + self.constant;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(PhiError::NonFinite { x: p.x, y: p.y })
        }
    }

    pub fn eval_grad_phi(&self, p: Point) -> Result<Point, PhiError> {
        self.check_proximity(p)?;
        let g = self.singular_gradient(p) + self.harmonic_gradient(p)?;
        if g.is_finite() {
            Ok(g)
        } else {
            Err(PhiError::NonFinite { x: p.x, y: p.y })
        }
    }

    /// ∂_Nφ at `p` for the unit normal `n`.
    pub fn normal_derivative(&self, p: Point, n: Point) -> Result<f64, PhiError> {
        Ok(self.eval_grad_phi(p)?.dot(n))
    }

    /// ∫ ∂_Nφ ds along the polyline `path`, N its left normal.
    ///
    /// Logarithmic terms integrate to −c·Δarg exactly; a nodal φ_L uses its
    /// discrete conjugate when available and Gauss quadrature otherwise.
    pub fn normal_flux(&self, path: &[Point]) -> Result<f64, PhiError> {
        if path.len() < 2 {
            return Ok(0.0);
        }
        let eps = self.eps();
        let mut total = 0.0;
        let charges = self.charges();
        for w in path.windows(2) {
            let (a, b) = (w[0], w[1]);
            for c in &charges {
                if point_segment_distance(c.position, a, b) < eps {
                    let m = a.lerp(b, 0.5);
                    return Err(PhiError::TooClose { x: m.x, y: m.y, eps });
                }
                total -= c.coeff() * subtended(c.position, a, b);
            }
        }
        total += self.harmonic_flux(path)?;
        Ok(total)
    }

    /// Flux of φ_L alone along `path`.
    pub fn harmonic_flux(&self, path: &[Point]) -> Result<f64, PhiError> {
        match &self.harmonic {
            HarmonicPart::Zero => Ok(0.0),
            HarmonicPart::Closed(cf) => {
                let mut t = 0.0;
                for w in path.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    for l in &cf.logs {
                        t -= l.coeff * subtended(l.center, a, b);
                    }
                    t -= cf.linear.cross(b - a);
                }
                Ok(t)
            }
            HarmonicPart::Nodal(n) => {
                let outside = |p: Point| PhiError::OutsideMesh { x: p.x, y: p.y };
                if n.conjugate.is_some() {
                    let first = path[0];
                    let last = path[path.len() - 1];
                    for p in path {
                        n.conjugate_value(*p).ok_or_else(|| outside(*p))?;
                    }
                    let psi0 = n.conjugate_value(first).ok_or_else(|| outside(first))?;
                    let psi1 = n.conjugate_value(last).ok_or_else(|| outside(last))?;
                    let mut t = -(psi1 - psi0);
                    for (c, a) in &n.periods {
                        for w in path.windows(2) {
                            t -= a * subtended(*c, w[0], w[1]);
                        }
                    }
                    return Ok(t);
                }
                let gl = GaussLegendre::new(4);
                let piece = self.diameter / 256.0;
                let mut t = 0.0;
                for w in path.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    let len = a.dist(b);
                    if len == 0.0 {
                        continue;
                    }
                    let nrm = (b - a).perp() / len;
                    let m = ((len / piece).ceil() as usize).max(1);
                    for j in 0..m {
                        let (s0, s1) = (j as f64 / m as f64, (j + 1) as f64 / m as f64);
                        for (s, wt) in gl.mapped(s0, s1) {
                            let p = a.lerp(b, s);
                            t += wt * len * n.gradient(p).ok_or_else(|| outside(p))?.dot(nrm);
                        }
                    }
                }
                Ok(t)
            }
        }
    }

    /// ∫ ∂_Nφ ds along a curve segment, N its left normal.
    pub fn segment_flux(&self, seg: &CurveSegment) -> Result<f64, PhiError> {
        self.normal_flux(&fine_polyline(seg))
    }

    /// ∫ e^φ ds along the curve, adaptive to 1e-10 relative.
    pub fn manifold_length(&self, curve: &CurveSegment) -> Result<f64, PhiError> {
        let mut err = None;
        let mut f = |s: f64| match self.eval_phi(curve.point_at(s)) {
            Ok(v) => v.exp(),
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        };
        let v = adaptive(&mut f, 0.0, curve.length(), 1e-10, 0.0);
        match err {
            Some(e) => Err(e),
            None => Ok(v),
        }
    }

    /// Manifold length of a polyline.
    pub fn manifold_length_polyline(&self, path: &[Point]) -> Result<f64, PhiError> {
        let mut total = 0.0;
        for w in path.windows(2) {
            if w[0] != w[1] {
                total += self.manifold_length(&CurveSegment::line(w[0], w[1]))?;
            }
        }
        Ok(total)
    }

    /// ∬ e^{2φ} da over the region bounded by `region`.
    ///
    /// Charges with Q ≤ −2π inside or on the region make the integral diverge.
    /// Other charges in the region become triangle vertices and are integrated
    /// with a Gauss–Jacobi rule matched to their radial exponent.
    pub fn manifold_area(&self, region: &BoundaryLoop) -> Result<AreaValue, PhiError> {
        let region = if region.signed_area() < 0.0 { region.reversed() } else { region.clone() };
        let eps = self.eps();
        let charges: Vec<Charge> = self
            .charges()
            .into_iter()
            .filter(|c| c.strength != 0.0)
            .filter(|c| region.encloses(c.position) || loop_distance(&region, c.position) < eps)
            .collect();
        if charges.iter().any(|c| c.strength <= -TAU) {
            return Ok(AreaValue::Divergent);
        }
        // Polygon through the segment samples plus circular lunes for arcs.
        let mut poly: Vec<Point> = Vec::new();
        let mut lunes: Vec<CurveSegment> = Vec::new();
        for seg in &region.segments {
            let pts = seg.polygonize();
            poly.extend(pts[..pts.len() - 1].iter().copied());
            if let CurveSegment::Arc { center, radius, .. } = seg {
                for w in pts.windows(2) {
                    let arc = CurveSegment::arc(
                        w[0],
                        w[1],
                        *center,
                        if seg.total_turning() > 0.0 { crate::geometry::Sweep::Ccw } else { crate::geometry::Sweep::Cw },
                    )?;
                    debug_assert!((arc_radius(&arc) - radius).abs() < 1e-9 * radius);
                    lunes.push(arc);
                }
            }
        }
        let mut tris = ear_clip(&poly);
        for c in &charges {
            tris = insert_vertex(tris, c.position, eps);
        }
        let f = |p: Point| -> Result<f64, PhiError> { Ok((2.0 * self.eval_phi(p)?).exp()) };
        let mut total = 0.0;
        for t in &tris {
            total += self.triangle_integral(*t, &charges, &f, eps)?;
        }
        let gl = GaussLegendre::new(12);
        for arc in &lunes {
            let (a, b) = (arc.start(), arc.end());
            let len = arc.length();
            for (sig, ws) in gl.mapped(0.0, 1.0) {
                let z = arc.point_at(sig * len);
                let dz = arc.tangent(sig * len) * len;
                let w = a.lerp(b, sig);
                let dw = b - a;
                for (t, wt) in gl.mapped(0.0, 1.0) {
                    let x = w + (z - w) * t;
                    let jac = (dw + (dz - dw) * t).cross(z - w);
                    total -= ws * wt * jac * f(x)?;
                }
            }
        }
        Ok(AreaValue::Finite(total))
    }

    fn triangle_integral(
        &self,
        tri: [Point; 3],
        charges: &[Charge],
        f: &dyn Fn(Point) -> Result<f64, PhiError>,
        eps: f64,
    ) -> Result<f64, PhiError> {
        let singular: Vec<(usize, f64)> = (0..3)
            .filter_map(|i| charges.iter().find(|c| c.position.dist(tri[i]) < eps).map(|c| (i, c.coeff())))
            .collect();
        match singular.len() {
            0 => adaptive_triangle(tri, f),
            1 => {
                let (i, c) = singular[0];
                duffy(tri[i], tri[(i + 1) % 3], tri[(i + 2) % 3], c, f)
            }
            _ => {
                // Separate the singular vertices by splitting the edge between two of them.
                let (i, j) = (singular[0].0, singular[1].0);
                let m = tri[i].lerp(tri[j], 0.5);
                let k = 3 - i - j;
                let a = self.triangle_integral(orient_ccw([tri[i], m, tri[k]]), charges, f, eps)?;
                let b = self.triangle_integral(orient_ccw([m, tri[j], tri[k]]), charges, f, eps)?;
                Ok(a + b)
            }
        }
    }

    /// e^{−φ}(κ_g − ∂_Nφ) at arclength `s`: the manifold geodesic curvature.
    pub fn tilde_kappa(&self, curve: &CurveSegment, s: f64) -> Result<f64, PhiError> {
        let kappa = curve.curvature_at(s)?;
        let p = curve.point_at(s);
        let phi = self.eval_phi(p)?;
        let dn = self.eval_grad_phi(p)?.dot(curve.normal(s));
        Ok((-phi).exp() * (kappa - dn))
    }
}

fn quantum_directions(q: Quantum) -> i32 {
    q.directions()
}

fn arc_radius(seg: &CurveSegment) -> f64 {
    match seg {
        CurveSegment::Arc { radius, .. } => *radius,
        _ => 0.0,
    }
}

/// Dirichlet value −ln F for a positive cell size F.
pub fn size_to_dirichlet(f: f64) -> Result<f64, PhiError> {
    if f > 0.0 && f.is_finite() {
        Ok(-f.ln())
    } else {
        Err(PhiError::NonPositiveSize(f))
    }
}

/// Signed angle subtended at `c` by the straight piece a → b.
fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = b - a;
    let l2 = d.norm2();
    if l2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(d) / l2).clamp(0.0, 1.0);
    p.dist(a + d * t)
}

fn loop_distance(l: &BoundaryLoop, p: Point) -> f64 {
    l.segments.iter().map(|s| s.closest(p).0).fold(f64::INFINITY, f64::min)
}

/// Samples a segment finely enough that chord pieces subtend the same angle
/// as the curve at any point outside a thin lune.
pub(crate) fn fine_polyline(seg: &CurveSegment) -> Vec<Point> {
    match seg {
        CurveSegment::Line { a, b } => alloc::vec![*a, *b],
        CurveSegment::Arc { sweep, .. } => {
            let n = ((sweep.abs() / 0.01).ceil() as usize).max(2);
            let len = seg.length();
            (0..=n).map(|i| seg.point_at(len * i as f64 / n as f64)).collect()
        }
        CurveSegment::Polyline { points, .. } => points.clone(),
    }
}

fn orient_ccw(t: [Point; 3]) -> [Point; 3] {
    if (t[1] - t[0]).cross(t[2] - t[0]) < 0.0 {
        [t[0], t[2], t[1]]
    } else {
        t
    }
}

/// Splits triangles so that `p` becomes a vertex of the triangulation.
fn insert_vertex(tris: Vec<[Point; 3]>, p: Point, eps: f64) -> Vec<[Point; 3]> {
    let mut out = Vec::with_capacity(tris.len() + 2);
    for t in tris {
        if t.iter().any(|v| v.dist(p) < eps) {
            out.push(t);
            continue;
        }
        let area = (t[1] - t[0]).cross(t[2] - t[0]);
        let bc = [
            (t[1] - p).cross(t[2] - p) / area,
            (t[2] - p).cross(t[0] - p) / area,
            (t[0] - p).cross(t[1] - p) / area,
        ];
        let scale = (t[1] - t[0]).norm().max((t[2] - t[0]).norm());
        let tol = eps / scale.max(f64::MIN_POSITIVE);
        if bc.iter().any(|b| *b < -tol) {
            out.push(t);
            continue;
        }
        for i in 0..3 {
            // Edge opposite vertex i; skip the sliver when p lies on it.
            if bc[i] <= tol {
                continue;
            }
            out.push([p, t[(i + 1) % 3], t[(i + 2) % 3]]);
        }
    }
    out
}

/// Adaptive 7-point rule with 4-way subdivision.
fn adaptive_triangle(tri: [Point; 3], f: &dyn Fn(Point) -> Result<f64, PhiError>) -> Result<f64, PhiError> {
    let rule = |t: &[Point; 3]| -> Result<f64, PhiError> {
        let a = 0.5 * (t[1] - t[0]).cross(t[2] - t[0]);
        let mut s = 0.0;
        for (b, w) in TRI7 {
            s += w * f(t[0] * b[0] + t[1] * b[1] + t[2] * b[2])?;
        }
        Ok(s * a)
    };
    let children = |t: &[Point; 3]| {
        let (m01, m12, m20) = (t[0].lerp(t[1], 0.5), t[1].lerp(t[2], 0.5), t[2].lerp(t[0], 0.5));
        [[t[0], m01, m20], [m01, t[1], m12], [m20, m12, t[2]], [m01, m12, m20]]
    };
    let whole = rule(&tri)?;
    let mut stack = alloc::vec![(tri, whole, 0u32)];
    let scale_area = 0.5 * (tri[1] - tri[0]).cross(tri[2] - tri[0]).abs();
    let mut total = 0.0;
    while let Some((t, est, depth)) = stack.pop() {
        let kids = children(&t);
        let mut parts = [0.0; 4];
        for (k, c) in kids.iter().enumerate() {
            parts[k] = rule(c)?;
        }
        let fine: f64 = parts.iter().sum();
        let frac = 0.5 * (t[1] - t[0]).cross(t[2] - t[0]).abs() / scale_area.max(f64::MIN_POSITIVE);
        let tol = 1e-11 * whole.abs().max(1e-300) * frac.max(1e-6);
        if (fine - est).abs() <= tol || depth >= 8 {
            total += fine;
        } else {
            for (c, e) in kids.into_iter().zip(parts) {
                stack.push((c, e, depth + 1));
            }
        }
    }
    Ok(total)
}

/// ∬ over triangle (p, b, c) with a charge of coefficient `c` at vertex p.
///
/// Duffy coordinates x = p + u·(b − p + v·(c − b)) turn the r^{2c} factor and
/// the Jacobian into u^{2c+1}, handled exactly by Gauss–Jacobi in u.
fn duffy(p: Point, b: Point, cpt: Point, coeff: f64, f: &dyn Fn(Point) -> Result<f64, PhiError>) -> Result<f64, PhiError> {
    let a = 2.0 * coeff + 1.0;
    let (un, uw) = gauss_jacobi_01(20, a);
    let jac = (b - p).cross(cpt - p).abs();
    let mut err = None;
    let mut inner = |v: f64| {
        let e = (b - p) + (cpt - b) * v;
        let mut acc = 0.0;
        for (u, wu) in un.iter().zip(&uw) {
            // f(x) = |x − p|^{2c}·h(x); the power is divided out analytically.
            match f(p + e * *u) {
                Ok(fx) => acc += wu * fx / u.powf(2.0 * coeff),
                Err(e) => {
                    err.get_or_insert(e);
                }
            }
        }
        acc * jac
    };
    let total = adaptive(&mut inner, 0.0, 1.0, 1e-12, 0.0);
    if let Some(e) = err {
        return Err(e);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Sweep;
    use core::f64::consts::{E, FRAC_PI_2, PI};

    fn disk_loop(r: f64) -> BoundaryLoop {
        BoundaryLoop::new(alloc::vec![CurveSegment::arc_polar(Point::ZERO, r, 0.0, TAU).unwrap()])
    }

    fn annulus_field(c: f64) -> PhiField {
        PhiField::new(Quantum::Quad, 4.0)
            .with_harmonic(HarmonicPart::Closed(ClosedForm {
                logs: alloc::vec![LogTerm { center: Point::ZERO, coeff: -1.0 }],
                linear: Point::ZERO,
            }))
            .with_constant(c)
    }

    #[test]
    fn single_cone_value_and_gradient() {
        let f = PhiField::new(Quantum::Quad, 2.0).with_cone(ConePoint::interior(Point::ZERO, 1));
        assert!((f.eval_phi(Point::new(E, 0.0)).unwrap() - 0.25).abs() < 1e-15);
        let g = f.eval_grad_phi(Point::new(1.0, 0.0)).unwrap();
        assert!((g.x - 0.25).abs() < 1e-15 && g.y.abs() < 1e-15);
        assert!(matches!(f.eval_phi(Point::new(1e-12, 0.0)), Err(PhiError::TooClose { .. })));
    }

    #[test]
    fn annulus_value_gradient_length() {
        let f = annulus_field(0.7);
        assert!((f.eval_phi(Point::new(0.0, 1.0)).unwrap() - 0.7).abs() < 1e-15);
        let g = f.eval_grad_phi(Point::new(1.5, 0.0)).unwrap();
        assert!((g.x + 1.0 / 1.5).abs() < 1e-15);
        let radial = CurveSegment::line(Point::new(1.0, 0.0), Point::new(2.0, 0.0));
        let l = annulus_field(0.0).manifold_length(&radial).unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-12);
        let c = (10.0 / 2f64.ln()).ln();
        let l = annulus_field(c).manifold_length(&radial).unwrap();
        assert!((l - 10.0).abs() < 1e-9);
    }

    #[test]
    fn area_of_unit_square_and_cone_disk() {
        let sq = crate::geometry::polygon_loop(&[
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ]);
        let flat = PhiField::new(Quantum::Quad, 1.5);
        assert!((flat.manifold_area(&sq).unwrap().finite().unwrap() - 1.0).abs() < 1e-13);
        let cone = PhiField::new(Quantum::Quad, 2.0).with_cone(ConePoint::interior(Point::ZERO, -1));
        let a = cone.manifold_area(&disk_loop(1.0)).unwrap().finite().unwrap();
        assert!((a - 4.0 * PI / 3.0).abs() < 1e-9, "{a}");
        let div = PhiField::new(Quantum::Quad, 2.0).with_cone(ConePoint::interior(Point::new(0.1, 0.2), -4));
        assert_eq!(div.manifold_area(&disk_loop(1.0)).unwrap(), AreaValue::Divergent);
    }

    #[test]
    fn off_centre_cone_area_matches_polar_oracle() {
        // Cone k = 4 at (0.3, 0): e^{2φ} = r², area over the unit disk is
        // ∬ |z − p|² = π/2 + π·|p|².
        let f = PhiField::new(Quantum::Quad, 2.0).with_cone(ConePoint::interior(Point::new(0.3, 0.0), 4));
        let a = f.manifold_area(&disk_loop(1.0)).unwrap().finite().unwrap();
        assert!((a - (FRAC_PI_2 + PI * 0.09)).abs() < 1e-9, "{a}");
    }

    #[test]
    fn tilde_kappa_on_circles() {
        let circle = CurveSegment::arc(Point::new(1.5, 0.0), Point::new(0.0, 1.5), Point::ZERO, Sweep::Ccw).unwrap();
        let t = annulus_field(0.3).tilde_kappa(&circle, 0.4).unwrap();
        assert!(t.abs() < 1e-14);
        let t = PhiField::new(Quantum::Quad, 3.0).tilde_kappa(&circle, 0.4).unwrap();
        assert!((t - 1.0 / 1.5).abs() < 1e-14);
    }

    #[test]
    fn flux_around_cone_is_quantized() {
        let f = PhiField::new(Quantum::Quad, 2.0).with_cone(ConePoint::interior(Point::ZERO, -1));
        // Clockwise circle: left normal points outward.
        let c = CurveSegment::arc_polar(Point::ZERO, 0.5, 0.0, -TAU).unwrap();
        assert!((f.segment_flux(&c).unwrap() + FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn size_to_dirichlet_values() {
        assert_eq!(size_to_dirichlet(1.0).unwrap(), 0.0);
        assert!((size_to_dirichlet(E).unwrap() + 1.0).abs() < 1e-15);
        assert!(size_to_dirichlet(0.0).is_err());
    }
}
