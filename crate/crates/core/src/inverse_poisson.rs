//! Recovery of interior point charges from boundary Cauchy data.
//!
//! For v harmonic, Green's second identity with the inward normal gives
//! ∮(φ ∂_N v − v ∂_Nφ) ds = Σ Q_i v(z_i). Taking v = w^m in a centred and
//! scaled coordinate w turns boundary data into power moments of the charges,
//! which a matrix pencil inverts.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use log::{debug, warn};
use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::background_solver::{triangulate, BackgroundSolver, MeshError, SolveError};
use crate::conditions::{check_all, ConditionError, ConditionReport, Tolerances};
use crate::geometry::{BoundaryPoint, CurveSegment, DomainSpec, Point};
#[allow(unused_imports)]
use crate::linalg::{complex_lstsq, complex_svd};
#[allow(unused_imports)]
use crate::math::Float;
use crate::phi_field::{size_to_dirichlet, ConeClass, ConePoint, HarmonicPart, JunctionCharge, PhiError, PhiField};
use crate::quadrature::GaussLegendre;

type C64 = Complex<f64>;

fn cabs(z: &C64) -> f64 {
    z.re.hypot(z.im)
}

/// Default highest moment order.
pub const DEFAULT_MOMENT_ORDER: usize = 12;
/// Required ratio between the last kept and first dropped singular value.
pub const RANK_GAP: f64 = 1e3;
/// Raw strengths within this fraction of q snap to the lattice.
pub const SNAP_FRACTION: f64 = 0.1;
/// Gauss nodes per boundary panel.
pub const PANEL_NODES: usize = 16;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InverseError {
    #[error("boundary data has {0} samples, too few for the requested moments")]
    InsufficientSamples(usize),
    #[error("moment order {0} is too small; need at least 2")]
    MomentOrder(usize),
    #[error("charge count is ambiguous: singular values {0:?}")]
    IndeterminateCount(Vec<f64>),
    #[error("eigenvalue computation failed")]
    Eigen,
    #[error("recovered charge at ({x}, {y}) lies outside the domain")]
    OutsideDomain { x: f64, y: f64 },
    #[error("boundary loop {0} is not closed")]
    OpenLoop(usize),
    #[error("malformed Cauchy data: {0}")]
    Malformed(String),
    #[error(transparent)]
    Phi(#[from] PhiError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Conditions(#[from] ConditionError),
}

/// One boundary sample with its quadrature weight.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchySample {
    pub loop_index: usize,
    pub segment: usize,
    pub s: f64,
    pub position: Point,
    /// Unit inward normal.
    pub normal: Point,
    pub weight: f64,
    pub phi: f64,
    pub dn_phi: f64,
}

/// Paired Dirichlet and Neumann boundary traces, ordered by arclength per loop.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CauchyData {
    pub samples: Vec<CauchySample>,
    /// Gauss nodes per panel and the longest panel used.
    pub panel_nodes: usize,
    pub panel_length: f64,
}

impl CauchyData {
    /// Translated copy: positions move by `t`, values are unchanged.
    pub fn translated(&self, t: Point) -> CauchyData {
        let mut out = self.clone();
        for s in &mut out.samples {
            s.position += t;
        }
        out
    }
}

/// Boundary quadrature nodes: composite Gauss–Legendre panels per segment.
/// Polylines get two nodes per chord so that no panel straddles a kink.
pub fn boundary_nodes(domain: &DomainSpec, panel: f64) -> Vec<(BoundaryPoint, Point, f64)> {
    let gl = GaussLegendre::new(PANEL_NODES);
    let g2 = GaussLegendre::new(2);
    let mut out = Vec::new();
    for (li, l) in domain.loops.iter().enumerate() {
        for (si, seg) in l.segments.iter().enumerate() {
            let mut push = |s: f64, w: f64| {
                let position = seg.point_at(s);
                out.push((BoundaryPoint { loop_index: li, segment: si, s, position }, seg.normal(s), w));
            };
            match seg {
                CurveSegment::Polyline { cumulative, .. } => {
                    for c in cumulative.windows(2) {
                        for (s, w) in g2.mapped(c[0], c[1]) {
                            push(s, w);
                        }
                    }
                }
                _ => {
                    let len = seg.length();
                    let m = ((len / panel).ceil() as usize).max(1);
                    for j in 0..m {
                        let (a, b) = (len * j as f64 / m as f64, len * (j + 1) as f64 / m as f64);
                        for (s, w) in gl.mapped(a, b) {
                            push(s, w);
                        }
                    }
                }
            }
        }
    }
    out
}

fn default_panel(domain: &DomainSpec) -> f64 {
    domain.diameter() / 64.0
}

/// Boundary charges and junction charges placed before the inversion.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ChargeHints {
    pub boundary: Vec<ConePoint>,
    pub junctions: Vec<JunctionCharge>,
}

impl ChargeHints {
    fn field(&self, base: &PhiField) -> PhiField {
        let mut f = PhiField::new(base.quantum, base.diameter);
        f.cones = self.boundary.clone();
        f.junction_charges = self.junctions.clone();
        f
    }
}

/// Cauchy data from a cell-size demand F: Dirichlet −ln F and Neumann κ_g,
/// with the fields of hinted boundary and junction charges subtracted.
pub fn assemble_boundary_data(
    domain: &DomainSpec,
    size: &dyn Fn(BoundaryPoint) -> f64,
    hints: &ChargeHints,
) -> Result<CauchyData, InverseError> {
    let panel = default_panel(domain);
    let hint_field = hints.field(&PhiField::new(domain.quantum, domain.diameter()));
    let mut samples = Vec::new();
    for (bp, normal, weight) in boundary_nodes(domain, panel) {
        let seg = domain.segment(bp.loop_index, bp.segment);
        let dirichlet = size_to_dirichlet(size(bp))?;
        let kappa = seg.curvature(bp.s);
        let phi = dirichlet - hint_field.singular_value(bp.position);
        let dn_phi = kappa - hint_field.singular_gradient(bp.position).dot(normal);
        samples.push(CauchySample {
            loop_index: bp.loop_index,
            segment: bp.segment,
            s: bp.s,
            position: bp.position,
            normal,
            weight,
            phi,
            dn_phi,
        });
    }
    Ok(CauchyData { samples, panel_nodes: PANEL_NODES, panel_length: panel })
}

/// Cauchy data sampled directly from a field.
pub fn cauchy_from_field(domain: &DomainSpec, field: &PhiField) -> Result<CauchyData, InverseError> {
    let panel = default_panel(domain);
    let mut samples = Vec::new();
    for (bp, normal, weight) in boundary_nodes(domain, panel) {
        samples.push(CauchySample {
            loop_index: bp.loop_index,
            segment: bp.segment,
            s: bp.s,
            position: bp.position,
            normal,
            weight,
            phi: field.eval_phi(bp.position)?,
            dn_phi: field.eval_grad_phi(bp.position)?.dot(normal),
        });
    }
    Ok(CauchyData { samples, panel_nodes: PANEL_NODES, panel_length: panel })
}

/// Each loop's samples must wrap around: the gap from the last sample back to
/// the first may not exceed a few times the largest step along the loop.
fn check_closed(data: &CauchyData) -> Result<(), InverseError> {
    let mut start = 0;
    while start < data.samples.len() {
        let li = data.samples[start].loop_index;
        let end = start + data.samples[start..].iter().take_while(|s| s.loop_index == li).count();
        let run = &data.samples[start..end];
        let step = run.windows(2).map(|w| w[0].position.dist(w[1].position)).fold(0.0, f64::max);
        let gap = run[run.len() - 1].position.dist(run[0].position);
        if run.len() < 3 || gap > 4.0 * step {
            return Err(InverseError::OpenLoop(li));
        }
        start = end;
    }
    Ok(())
}

/// Moments μ_m = Σ Q_i w_i^m with w = (z − center)/scale.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub center: Point,
    pub scale: f64,
    pub values: Vec<C64>,
}

impl Moments {
    pub fn order(&self) -> usize {
        self.values.len() - 1
    }
}

/// Moments about the origin with unit scale.
pub fn harmonic_moments(data: &CauchyData, order: usize) -> Result<Moments, InverseError> {
    moments_in_frame(data, order, Point::ZERO, 1.0)
}

/// Moments in a frame centred on the boundary centroid and scaled by the
/// largest sample distance, which keeps high orders well conditioned.
pub fn harmonic_moments_framed(data: &CauchyData, order: usize) -> Result<Moments, InverseError> {
    let total: f64 = data.samples.iter().map(|s| s.weight).sum();
    if data.samples.is_empty() || !(total > 0.0) {
        return Err(InverseError::InsufficientSamples(data.samples.len()));
    }
    let mut c = Point::ZERO;
    for s in &data.samples {
        c += s.position * (s.weight / total);
    }
    let scale = data.samples.iter().map(|s| s.position.dist(c)).fold(0.0, f64::max);
    moments_in_frame(data, order, c, scale)
}

fn moments_in_frame(data: &CauchyData, order: usize, center: Point, scale: f64) -> Result<Moments, InverseError> {
    if data.samples.len() < 2 * (order + 1) {
        return Err(InverseError::InsufficientSamples(data.samples.len()));
    }
    check_closed(data)?;
    let mut mu = alloc::vec![C64::new(0.0, 0.0); order + 1];
    for s in &data.samples {
        let w = C64::new((s.position.x - center.x) / scale, (s.position.y - center.y) / scale);
        let nu = C64::new(s.normal.x, s.normal.y) / scale;
        // v = w^m, ∂_N v = m·w^{m−1}·ν/scale.
        let mut wm1 = C64::new(0.0, 0.0); // w^{m−1}
        let mut wm = C64::new(1.0, 0.0); // w^m
        for (m, slot) in mu.iter_mut().enumerate() {
            let dv = if m == 0 { C64::new(0.0, 0.0) } else { wm1 * nu * m as f64 };
            *slot += (dv * s.phi - wm * s.dn_phi) * s.weight;
            wm1 = wm;
            wm *= w;
        }
    }
    Ok(Moments { center, scale, values: mu })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveredCharges {
    pub count: usize,
    pub positions: Vec<Point>,
    /// Raw complex strengths as (re, im).
    pub raw_strengths: Vec<(f64, f64)>,
    pub k: Vec<i64>,
    /// False where the raw strength missed the lattice by more than the snap window.
    pub quantized: Vec<bool>,
    pub singular_values: Vec<f64>,
    /// Relative moment misfit before and after polishing.
    pub residual_initial: f64,
    pub residual_final: f64,
    pub notes: Vec<String>,
}

impl RecoveredCharges {
    pub fn all_quantized(&self) -> bool {
        self.quantized.iter().all(|q| *q)
    }

    pub fn cones(&self) -> Vec<ConePoint> {
        self.positions.iter().zip(&self.k).map(|(p, k)| ConePoint::interior(*p, *k as i32)).collect()
    }
}

fn moment_misfit(mu: &[C64], w: &[C64], q: &[C64]) -> f64 {
    let norm: f64 = mu.iter().map(|m| m.norm_sqr()).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let r: f64 = mu
        .iter()
        .enumerate()
        .map(|(m, mu)| {
            let model: C64 = w.iter().zip(q).map(|(w, q)| q * w.powu(m as u32)).sum();
            (model - mu).norm_sqr()
        })
        .sum::<f64>()
        .sqrt();
    r / norm
}

/// Number, positions and quantized strengths of the charges behind `moments`.
///
/// `tol` is the relative singular-value floor below which Hankel directions
/// count as noise.
pub fn recover_charges(moments: &Moments, tol: f64, q: f64) -> Result<RecoveredCharges, InverseError> {
    let order = moments.order();
    if order < 2 {
        return Err(InverseError::MomentOrder(order));
    }
    let mu = &moments.values;
    let cols = order / 2;
    let rows = order - cols;
    let h0 = DMatrix::from_fn(rows, cols, |i, j| mu[i + j]);
    let h1 = DMatrix::from_fn(rows, cols, |i, j| mu[i + j + 1]);
    let svd = complex_svd(&h0);
    let sv = svd.s.clone();
    let empty = RecoveredCharges {
        count: 0,
        positions: Vec::new(),
        raw_strengths: Vec::new(),
        k: Vec::new(),
        quantized: Vec::new(),
        singular_values: sv.clone(),
        residual_initial: 0.0,
        residual_final: 0.0,
        notes: Vec::new(),
    };
    let mu_scale = mu.iter().map(cabs).fold(0.0, f64::max);
    if sv.is_empty() || sv[0] <= tol.max(1e-12) * q.max(1.0) || mu_scale <= tol {
        return Ok(empty);
    }
    let floor = tol * sv[0];
    let count = sv.iter().take_while(|s| **s > floor).count();
    let next = sv.get(count).copied().unwrap_or(0.0);
    if count < sv.len() && sv[count - 1] < RANK_GAP * next {
        return Err(InverseError::IndeterminateCount(sv));
    }
    if count == sv.len() && cols > 1 {
        // Full rank: more charges than the pencil can resolve.
        return Err(InverseError::IndeterminateCount(sv));
    }
    let un = svd.u.columns(0, count).into_owned();
    let vn = svd.v.columns(0, count).into_owned();
    let sinv = DMatrix::from_fn(count, count, |i, j| if i == j { C64::new(1.0 / sv[i], 0.0) } else { C64::new(0.0, 0.0) });
    let a = sinv * un.adjoint() * h1 * vn;
    let eig = a.schur().eigenvalues().ok_or(InverseError::Eigen)?;
    let mut w: Vec<C64> = eig.iter().copied().collect();
    // Deterministic order: by real part, then imaginary.
    w.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let strengths = vandermonde_strengths(mu, &w).ok_or(InverseError::Eigen)?;
    let residual_initial = moment_misfit(mu, &w, &strengths);
    let mut k = Vec::with_capacity(count);
    let mut quantized = Vec::with_capacity(count);
    let mut notes = Vec::new();
    for s in &strengths {
        let n = (s.re / q).round();
        let ok = (s.re - n * q).abs() <= SNAP_FRACTION * q;
        if !ok {
            warn!("non-quantized charge: raw strength {} is not within {} of a lattice point", s.re, SNAP_FRACTION * q);
            notes.push(alloc::format!("non-quantized charge {:.6} (nearest k = {})", s.re, n));
        }
        k.push(n as i64);
        quantized.push(ok);
    }
    // Snapped strengths would bias the positions whenever the data sit off the
    // lattice, so the fitted ones are held instead.
    polish_positions(mu, &mut w, &strengths);
    let residual_final = moment_misfit(mu, &w, &strengths);
    debug!("recovered {count} charges, misfit {residual_initial:e} -> {residual_final:e}");
    let positions = w
        .iter()
        .map(|w| Point::new(moments.center.x + moments.scale * w.re, moments.center.y + moments.scale * w.im))
        .collect();
    Ok(RecoveredCharges {
        count,
        positions,
        raw_strengths: strengths.iter().map(|s| (s.re, s.im)).collect(),
        k,
        quantized,
        singular_values: sv,
        residual_initial,
        residual_final,
        notes,
    })
}

fn vandermonde_strengths(mu: &[C64], w: &[C64]) -> Option<Vec<C64>> {
    let v = DMatrix::from_fn(mu.len(), w.len(), |m, i| w[i].powu(m as u32));
    let b = DVector::from_iterator(mu.len(), mu.iter().copied());
    let x = complex_lstsq(&v, &b, 1e-14)?;
    Some(x.iter().copied().collect())
}

/// Gauss–Newton on Σ_m |Σ_i Q_i w_i^m − μ_m|² over the positions with the
/// strengths held fixed. The model is holomorphic in each w_i, so the complex
/// least-squares step is the real Gauss–Newton step.
fn polish_positions(mu: &[C64], w: &mut [C64], q: &[C64]) {
    let n = w.len();
    if n == 0 {
        return;
    }
    let mut best = moment_misfit(mu, w, q);
    for _ in 0..30 {
        let jac = DMatrix::from_fn(mu.len(), n, |m, i| {
            if m == 0 {
                C64::new(0.0, 0.0)
            } else {
                q[i] * w[i].powu(m as u32 - 1) * m as f64
            }
        });
        let r = DVector::from_fn(mu.len(), |m, _| {
            let model: C64 = w.iter().zip(q).map(|(w, q)| q * w.powu(m as u32)).sum();
            mu[m] - model
        });
        let Some(step) = complex_lstsq(&jac, &r, 1e-14) else { return };
        let trial: Vec<C64> = w.iter().zip(step.iter()).map(|(w, d)| w + d).collect();
        let t = moment_misfit(mu, &trial, q);
        if !(t < best) {
            return;
        }
        let small = step.iter().map(cabs).fold(0.0, f64::max) < 1e-15;
        w.copy_from_slice(&trial);
        best = t;
        if small {
            return;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PipelineOptions {
    pub mesh_h: f64,
    pub moment_order: usize,
    pub rank_tol: f64,
    pub tolerances: Tolerances,
}

impl PipelineOptions {
    pub fn for_domain(domain: &DomainSpec) -> Self {
        PipelineOptions {
            mesh_h: domain.diameter() / 40.0,
            moment_order: DEFAULT_MOMENT_ORDER,
            rank_tol: 1e-6,
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PipelineResult {
    pub field: PhiField,
    pub report: ConditionReport,
    pub recovered: RecoveredCharges,
    pub data: CauchyData,
}

/// assemble → moments → recover → re-solve → check, building its own mesh.
pub fn solve_pipeline(
    domain: &DomainSpec,
    size: &dyn Fn(BoundaryPoint) -> f64,
    hints: &ChargeHints,
    opts: &PipelineOptions,
) -> Result<PipelineResult, InverseError> {
    let mesh = Arc::new(triangulate(domain, opts.mesh_h)?);
    let solver = BackgroundSolver::new(mesh)?;
    solve_pipeline_with(&solver, domain, size, hints, opts)
}

/// As [`solve_pipeline`] on a prepared solver for `domain`.
pub fn solve_pipeline_with(
    solver: &BackgroundSolver,
    domain: &DomainSpec,
    size: &dyn Fn(BoundaryPoint) -> f64,
    hints: &ChargeHints,
    opts: &PipelineOptions,
) -> Result<PipelineResult, InverseError> {
    let data = assemble_boundary_data(domain, size, hints)?;
    let moments = harmonic_moments_framed(&data, opts.moment_order)?;
    let recovered = recover_charges(&moments, opts.rank_tol, domain.q())?;
    for p in &recovered.positions {
        if !domain.contains(*p) {
            return Err(InverseError::OutsideDomain { x: p.x, y: p.y });
        }
    }
    let field = resolve_direct(solver, domain, &data, &recovered.cones(), hints)?;
    let report = check_all(&field, domain, &opts.tolerances)?;
    Ok(PipelineResult { field, report, recovered, data })
}

/// Direct solve with given charges: φ_L from the Neumann data κ − ∂_Nφ_c and
/// the additive constant fitted to the Dirichlet data in the mean.
pub fn resolve_direct(
    solver: &BackgroundSolver,
    domain: &DomainSpec,
    data: &CauchyData,
    interior: &[ConePoint],
    hints: &ChargeHints,
) -> Result<PhiField, InverseError> {
    let mut field = PhiField::new(domain.quantum, domain.diameter());
    for c in interior.iter().chain(&hints.boundary) {
        field = field.with_cone(*c);
    }
    for j in &hints.junctions {
        field = field.with_junction_charge(*j);
    }
    let g = |bp: BoundaryPoint| {
        let seg = domain.segment(bp.loop_index, bp.segment);
        seg.curvature(bp.s) - field.singular_gradient(bp.position).dot(seg.normal(bp.s))
    };
    let nodal = solver.solve_neumann_on(domain, &g, None)?;
    field = field.with_harmonic(HarmonicPart::Nodal(nodal));
    // The data carries −ln F minus the hinted charges; compare with the rest.
    let interior_only = {
        let mut f = PhiField::new(domain.quantum, domain.diameter());
        f.cones = interior.to_vec();
        f
    };
    let mut num = 0.0;
    let mut den = 0.0;
    for s in &data.samples {
        let model = interior_only.singular_value(s.position) + field.harmonic_value(s.position)?;
        num += s.weight * (s.phi - model);
        den += s.weight;
    }
    Ok(field.with_constant(num / den))
}

/// Interior charges of a field as a class filter.
pub fn interior_cones(field: &PhiField) -> Vec<ConePoint> {
    field.cones.iter().filter(|c| c.class == ConeClass::Interior).copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{disk, Quantum};
    use crate::phi_field::{ClosedForm, LogTerm};
    use core::f64::consts::{FRAC_PI_2, PI};

    fn cone_field(charges: &[(Point, i32)]) -> PhiField {
        let mut f = PhiField::new(Quantum::Quad, 2.0);
        for (p, k) in charges {
            f = f.with_cone(ConePoint::interior(*p, *k));
        }
        f
    }

    #[test]
    fn single_charge_moments() {
        let d = disk(Point::ZERO, 1.0, Quantum::Quad);
        let data = cauchy_from_field(&d, &cone_field(&[(Point::ZERO, 1)])).unwrap();
        let m = harmonic_moments(&data, 4).unwrap();
        assert!((m.values[0].re - FRAC_PI_2).abs() < 1e-10 && m.values[0].im.abs() < 1e-10);
        assert!(cabs(&m.values[1]) < 1e-10);
    }

    #[test]
    fn dipole_moments() {
        let d = disk(Point::ZERO, 1.0, Quantum::Quad);
        let dd = 0.3;
        let f = cone_field(&[(Point::new(dd, 0.0), 1), (Point::new(-dd, 0.0), -1)]);
        let m = harmonic_moments(&cauchy_from_field(&d, &f).unwrap(), 4).unwrap();
        assert!(cabs(&m.values[0]) < 1e-10);
        assert!((m.values[1].re - PI * dd).abs() < 1e-10 && m.values[1].im.abs() < 1e-10);
    }

    #[test]
    fn harmonic_field_has_zero_moments() {
        let d = disk(Point::ZERO, 1.0, Quantum::Quad);
        let f = PhiField::new(Quantum::Quad, 2.0).with_harmonic(HarmonicPart::Closed(ClosedForm {
            logs: alloc::vec![LogTerm { center: Point::new(2.0, 1.0), coeff: 0.7 }],
            linear: Point::new(0.3, -0.2),
        }));
        let m = harmonic_moments(&cauchy_from_field(&d, &f).unwrap(), 12).unwrap();
        assert!(m.values.iter().all(|v| cabs(v) < 1e-10));
        let r = recover_charges(&m, 1e-6, FRAC_PI_2).unwrap();
        assert_eq!(r.count, 0);
    }

    #[test]
    fn recovers_single_offset_charge() {
        let d = disk(Point::ZERO, 1.0, Quantum::Quad);
        let p = Point::new(0.3, 0.1);
        let data = cauchy_from_field(&d, &cone_field(&[(p, 1)])).unwrap();
        let r = recover_charges(&harmonic_moments_framed(&data, 12).unwrap(), 1e-6, FRAC_PI_2).unwrap();
        assert_eq!(r.count, 1);
        assert_eq!(r.k, alloc::vec![1]);
        assert!(r.positions[0].dist(p) < 1e-9);
    }

    #[test]
    fn open_loop_is_rejected() {
        let d = disk(Point::ZERO, 1.0, Quantum::Quad);
        let mut data = cauchy_from_field(&d, &cone_field(&[(Point::ZERO, 1)])).unwrap();
        let n = data.samples.len();
        data.samples.truncate(n / 2);
        assert_eq!(harmonic_moments(&data, 4), Err(InverseError::OpenLoop(0)));
    }

    #[test]
    fn off_lattice_strength_is_flagged() {
        let d = disk(Point::ZERO, 1.0, Quantum::Quad);
        let mut f = PhiField::new(Quantum::Quad, 2.0);
        f.junction_charges.push(JunctionCharge { position: Point::new(0.2, 0.0), theta_in: PI, n: 0, strength: 0.75 * FRAC_PI_2 });
        let data = cauchy_from_field(&d, &f).unwrap();
        let r = recover_charges(&harmonic_moments_framed(&data, 12).unwrap(), 1e-6, FRAC_PI_2).unwrap();
        assert_eq!(r.count, 1);
        assert!(!r.all_quantized());
    }
}
