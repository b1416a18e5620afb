//! On-disk formats: domain and field JSON, the plain-text mesh, Cauchy data
//! and size tables as CSV, and charge hint files.

use std::io::{BufRead, Read, Write};
use std::sync::Arc;

use conefield_core::background_solver::{BoundaryEdge, MeshError, NodalField, TriMesh};
use conefield_core::geometry::{BoundaryPoint, GeometryError, Sweep};
use conefield_core::inverse_poisson::{CauchyData, CauchySample, ChargeHints};
use conefield_core::phi_field::{ClosedForm, HarmonicPart, JunctionCharge, LogTerm};
use conefield_core::{BoundaryLoop, ConeClass, ConePoint, CurveSegment, DomainSpec, PhiField, Point, Quantum};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("mesh file line {line}: {message}")]
    Mesh { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    MeshBuild(#[from] MeshError),
}

fn pt([x, y]: [f64; 2]) -> Point {
    Point::new(x, y)
}

fn arr(p: Point) -> [f64; 2] {
    [p.x, p.y]
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepName {
    #[default]
    Ccw,
    Cw,
}

impl From<SweepName> for Sweep {
    fn from(s: SweepName) -> Sweep {
        match s {
            SweepName::Ccw => Sweep::Ccw,
            SweepName::Cw => Sweep::Cw,
        }
    }
}

/// One boundary segment.
///
/// An arc is given by its endpoints and either its centre or its radius; with
/// a radius the minor arc is chosen unless `large` is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SegmentFile {
    Line {
        points: [[f64; 2]; 2],
    },
    Arc {
        points: [[f64; 2]; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<[f64; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius: Option<f64>,
        #[serde(default)]
        sweep: SweepName,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        large: bool,
    },
    Circle {
        center: [f64; 2],
        radius: f64,
        #[serde(default)]
        sweep: SweepName,
    },
    Polyline {
        points: Vec<[f64; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        angles: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        curvatures: Option<Vec<f64>>,
    },
}

impl SegmentFile {
    pub fn to_segment(&self) -> Result<CurveSegment, FormatError> {
        Ok(match self {
            SegmentFile::Line { points } => CurveSegment::line(pt(points[0]), pt(points[1])),
            SegmentFile::Arc { points, center, radius, sweep, large } => {
                let (a, b) = (pt(points[0]), pt(points[1]));
                let c = match (center, radius) {
                    (Some(c), _) => pt(*c),
                    (None, Some(r)) => arc_center(a, b, *r, *sweep, *large)?,
                    (None, None) => return Err(FormatError::Invalid("arc needs a center or a radius".into())),
                };
                CurveSegment::arc(a, b, c, (*sweep).into())?
            }
            SegmentFile::Circle { center, radius, sweep } => {
                let turn = match sweep {
                    SweepName::Ccw => std::f64::consts::TAU,
                    SweepName::Cw => -std::f64::consts::TAU,
                };
                CurveSegment::arc_polar(pt(*center), *radius, 0.0, turn)?
            }
            SegmentFile::Polyline { points, angles, curvatures } => {
                let pts = points.iter().copied().map(pt).collect();
                match (angles, curvatures) {
                    (Some(a), Some(k)) => CurveSegment::polyline_with_frames(pts, a.clone(), k.clone())?,
                    (None, None) => CurveSegment::polyline(pts)?,
                    _ => return Err(FormatError::Invalid("polyline angles and curvatures go together".into())),
                }
            }
        })
    }

    pub fn from_segment(seg: &CurveSegment) -> SegmentFile {
        match seg {
            CurveSegment::Line { a, b } => SegmentFile::Line { points: [arr(*a), arr(*b)] },
            CurveSegment::Arc { center, radius, sweep, a, b, .. } => {
                let s = if *sweep > 0.0 { SweepName::Ccw } else { SweepName::Cw };
                if (sweep.abs() - std::f64::consts::TAU).abs() < 1e-12 && a == b {
                    SegmentFile::Circle { center: arr(*center), radius: *radius, sweep: s }
                } else {
                    SegmentFile::Arc { points: [arr(*a), arr(*b)], center: Some(arr(*center)), radius: None, sweep: s, large: false }
                }
            }
            CurveSegment::Polyline { points, angles, curvatures, .. } => SegmentFile::Polyline {
                points: points.iter().copied().map(arr).collect(),
                angles: Some(angles.clone()),
                curvatures: Some(curvatures.clone()),
            },
        }
    }
}

fn arc_center(a: Point, b: Point, r: f64, sweep: SweepName, large: bool) -> Result<Point, FormatError> {
    let half = a.dist(b) / 2.0;
    if !(r > 0.0) || r < half * (1.0 - 1e-12) {
        return Err(FormatError::Invalid(format!("arc radius {r} is shorter than half the chord {half}")));
    }
    let h = (r * r - half * half).max(0.0).sqrt();
    let m = (a + b) / 2.0;
    let left = (b - a).normalized().perp();
    // A counter-clockwise minor arc has its centre left of the chord.
    let side = if (sweep == SweepName::Ccw) != large { 1.0 } else { -1.0 };
    Ok(m + left * (h * side))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopFile {
    pub segments: Vec<SegmentFile>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeEntry {
    pub x: f64,
    pub y: f64,
    pub k: i32,
    #[serde(default = "interior")]
    pub class: ConeClass,
}

fn interior() -> ConeClass {
    ConeClass::Interior
}

impl ConeEntry {
    pub fn from_cone(c: &ConePoint) -> Self {
        ConeEntry { x: c.position.x, y: c.position.y, k: c.k, class: c.class }
    }

    pub fn to_cone(self) -> ConePoint {
        ConePoint { position: Point::new(self.x, self.y), k: self.k, class: self.class }
    }
}

/// Domain document: loops of segments plus optional given cones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainFile {
    #[serde(default = "quad")]
    pub quantum: Quantum,
    pub loops: Vec<LoopFile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cones: Vec<ConeEntry>,
}

fn quad() -> Quantum {
    Quantum::Quad
}

impl DomainFile {
    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String, FormatError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_domain(&self, quantum: Option<Quantum>) -> Result<DomainSpec, FormatError> {
        let loops = self
            .loops
            .iter()
            .map(|l| l.segments.iter().map(SegmentFile::to_segment).collect::<Result<Vec<_>, _>>().map(BoundaryLoop::new))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(DomainSpec::new(loops, quantum.unwrap_or(self.quantum))?)
    }

    pub fn cones(&self) -> Vec<ConePoint> {
        self.cones.iter().map(|c| c.to_cone()).collect()
    }

    pub fn from_domain(domain: &DomainSpec, cones: &[ConePoint]) -> Self {
        DomainFile {
            quantum: domain.quantum,
            loops: domain.loops.iter().map(|l| LoopFile { segments: l.segments.iter().map(SegmentFile::from_segment).collect() }).collect(),
            cones: cones.iter().map(ConeEntry::from_cone).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JunctionEntry {
    pub x: f64,
    pub y: f64,
    pub theta_in: f64,
    pub n: i64,
    pub strength: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub x: f64,
    pub y: f64,
    pub coeff: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshRef {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HarmonicDump {
    Zero,
    Closed {
        logs: Vec<LogEntry>,
        linear: [f64; 2],
    },
    Nodal {
        mesh: MeshRef,
        values: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        conjugate: Option<Vec<f64>>,
        /// Conjugate periods: a·arg(r − c) with c = (x, y) and a = coeff.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        periods: Vec<LogEntry>,
    },
}

/// Everything needed to evaluate a field again.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldDump {
    pub quantum: Quantum,
    pub diameter: f64,
    pub constant: f64,
    pub cones: Vec<ConeEntry>,
    pub junction_charges: Vec<JunctionEntry>,
    pub harmonic: HarmonicDump,
}

impl FieldDump {
    pub fn from_field(f: &PhiField) -> Self {
        let harmonic = match &f.harmonic {
            HarmonicPart::Zero => HarmonicDump::Zero,
            HarmonicPart::Closed(c) => HarmonicDump::Closed {
                logs: c.logs.iter().map(|l| LogEntry { x: l.center.x, y: l.center.y, coeff: l.coeff }).collect(),
                linear: arr(c.linear),
            },
            HarmonicPart::Nodal(n) => HarmonicDump::Nodal {
                mesh: MeshRef { vertices: n.mesh.vertices.iter().copied().map(arr).collect(), triangles: n.mesh.triangles.clone() },
                values: n.values.clone(),
                conjugate: n.conjugate.clone(),
                periods: n.periods.iter().map(|(c, a)| LogEntry { x: c.x, y: c.y, coeff: *a }).collect(),
            },
        };
        FieldDump {
            quantum: f.quantum,
            diameter: f.diameter,
            constant: f.constant,
            cones: f.cones.iter().map(ConeEntry::from_cone).collect(),
            junction_charges: f
                .junction_charges
                .iter()
                .map(|j| JunctionEntry { x: j.position.x, y: j.position.y, theta_in: j.theta_in, n: j.n, strength: j.strength })
                .collect(),
            harmonic,
        }
    }

    pub fn to_field(&self) -> Result<PhiField, FormatError> {
        let harmonic = match &self.harmonic {
            HarmonicDump::Zero => HarmonicPart::Zero,
            HarmonicDump::Closed { logs, linear } => HarmonicPart::Closed(ClosedForm {
                logs: logs.iter().map(|l| LogTerm { center: Point::new(l.x, l.y), coeff: l.coeff }).collect(),
                linear: pt(*linear),
            }),
            HarmonicDump::Nodal { mesh, values, conjugate, periods } => {
                if values.len() != mesh.vertices.len() || conjugate.as_ref().is_some_and(|c| c.len() != values.len()) {
                    return Err(FormatError::Invalid("nodal values must match the vertex count".into()));
                }
                let m = TriMesh::from_parts(mesh.vertices.iter().copied().map(pt).collect(), mesh.triangles.clone(), Vec::new())?;
                let mut n = NodalField::new(Arc::new(m), values.clone());
                n.conjugate = conjugate.clone();
                n.periods = periods.iter().map(|l| (Point::new(l.x, l.y), l.coeff)).collect();
                HarmonicPart::Nodal(n)
            }
        };
        let mut f = PhiField::new(self.quantum, self.diameter).with_harmonic(harmonic).with_constant(self.constant);
        f.cones = self.cones.iter().map(|c| c.to_cone()).collect();
        f.junction_charges = self
            .junction_charges
            .iter()
            .map(|j| JunctionCharge { position: Point::new(j.x, j.y), theta_in: j.theta_in, n: j.n, strength: j.strength })
            .collect();
        Ok(f)
    }
}

/// Writes the plain-text mesh format:
///
/// ```text
/// conefield-mesh 1
/// vertices <N>
/// <x> <y>                                  N lines
/// triangles <M>
/// <i> <j> <k>                              M lines, counter-clockwise, 0-based
/// boundary_edges <E>
/// <v0> <v1> <loop> <segment> <s0> <s1>     E lines, domain on the left
/// ```
///
/// Reals use the shortest representation that reads back to the same bits.
pub fn write_mesh<W: Write>(mesh: &TriMesh, mut w: W) -> Result<(), FormatError> {
    writeln!(w, "conefield-mesh 1")?;
    writeln!(w, "vertices {}", mesh.vertices.len())?;
    for p in &mesh.vertices {
        writeln!(w, "{:?} {:?}", p.x, p.y)?;
    }
    writeln!(w, "triangles {}", mesh.triangles.len())?;
    for t in &mesh.triangles {
        writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(w, "boundary_edges {}", mesh.boundary_edges.len())?;
    for e in &mesh.boundary_edges {
        writeln!(w, "{} {} {} {} {:?} {:?}", e.v[0], e.v[1], e.loop_index, e.segment, e.s0, e.s1)?;
    }
    Ok(())
}

pub fn read_mesh<R: BufRead>(r: R) -> Result<TriMesh, FormatError> {
    let mut lines = r.lines().enumerate().filter_map(|(i, l)| match l {
        Ok(s) if s.trim().is_empty() => None,
        other => Some((i + 1, other)),
    });
    let mut next = |what: &str| -> Result<(usize, String), FormatError> {
        match lines.next() {
            Some((i, Ok(s))) => Ok((i, s)),
            Some((_, Err(e))) => Err(e.into()),
            None => Err(FormatError::Mesh { line: 0, message: format!("unexpected end of file, expected {what}") }),
        }
    };
    let bad = |line: usize, message: String| FormatError::Mesh { line, message };
    let (l, header) = next("header")?;
    if header.trim() != "conefield-mesh 1" {
        return Err(bad(l, format!("bad header {header:?}")));
    }
    fn count(next: &mut dyn FnMut(&str) -> Result<(usize, String), FormatError>, key: &str) -> Result<usize, FormatError> {
        let (l, s) = next(key)?;
        let mut it = s.split_whitespace();
        match (it.next(), it.next().and_then(|n| n.parse().ok()), it.next()) {
            (Some(k), Some(n), None) if k == key => Ok(n),
            _ => Err(FormatError::Mesh { line: l, message: format!("expected `{key} <count>`, found {s:?}") }),
        }
    }
    fn fields<T: std::str::FromStr>(l: usize, s: &str, n: usize) -> Result<Vec<T>, FormatError> {
        let v: Vec<T> = s.split_whitespace().map(str::parse).collect::<Result<_, _>>().map_err(|_| FormatError::Mesh { line: l, message: format!("cannot parse {s:?}") })?;
        if v.len() != n {
            return Err(FormatError::Mesh { line: l, message: format!("expected {n} fields, found {}", v.len()) });
        }
        Ok(v)
    }
    let nv = count(&mut next, "vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (l, s) = next("vertex")?;
        let v: Vec<f64> = fields(l, &s, 2)?;
        vertices.push(Point::new(v[0], v[1]));
    }
    let nt = count(&mut next, "triangles")?;
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (l, s) = next("triangle")?;
        let v: Vec<usize> = fields(l, &s, 3)?;
        triangles.push([v[0], v[1], v[2]]);
    }
    let ne = count(&mut next, "boundary_edges")?;
    let mut edges = Vec::with_capacity(ne);
    for _ in 0..ne {
        let (l, s) = next("boundary edge")?;
        let parts: Vec<&str> = s.split_whitespace().collect();
        if parts.len() != 6 {
            return Err(bad(l, format!("expected 6 fields, found {}", parts.len())));
        }
        let u: Vec<usize> = fields(l, &parts[..4].join(" "), 4)?;
        let f: Vec<f64> = fields(l, &parts[4..].join(" "), 2)?;
        edges.push(BoundaryEdge { v: [u[0], u[1]], loop_index: u[2], segment: u[3], s0: f[0], s1: f[1] });
    }
    Ok(TriMesh::from_parts(vertices, triangles, edges)?)
}

#[derive(Debug, Serialize, Deserialize)]
struct CauchyRow {
    #[serde(rename = "loop")]
    loop_index: usize,
    segment: usize,
    s: f64,
    x: f64,
    y: f64,
    nx: f64,
    ny: f64,
    weight: f64,
    phi: f64,
    dn_phi: f64,
}

/// CSV with header `loop,segment,s,x,y,nx,ny,weight,phi,dn_phi`; the normal is
/// the unit inward normal and `weight` the quadrature weight of the sample.
pub fn write_cauchy<W: Write>(data: &CauchyData, w: W) -> Result<(), FormatError> {
    let mut out = csv::Writer::from_writer(w);
    for s in &data.samples {
        out.serialize(CauchyRow {
            loop_index: s.loop_index,
            segment: s.segment,
            s: s.s,
            x: s.position.x,
            y: s.position.y,
            nx: s.normal.x,
            ny: s.normal.y,
            weight: s.weight,
            phi: s.phi,
            dn_phi: s.dn_phi,
        })?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_cauchy<R: Read>(r: R) -> Result<CauchyData, FormatError> {
    let mut samples = Vec::new();
    for row in csv::Reader::from_reader(r).deserialize() {
        let row: CauchyRow = row?;
        samples.push(CauchySample {
            loop_index: row.loop_index,
            segment: row.segment,
            s: row.s,
            position: Point::new(row.x, row.y),
            normal: Point::new(row.nx, row.ny),
            weight: row.weight,
            phi: row.phi,
            dn_phi: row.dn_phi,
        });
    }
    let panel_length = samples.windows(2).map(|w| w[0].position.dist(w[1].position)).fold(0.0, f64::max);
    Ok(CauchyData { samples, panel_nodes: 0, panel_length })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HintsFile {
    #[serde(default)]
    pub boundary: Vec<BoundaryHint>,
    #[serde(default)]
    pub junctions: Vec<JunctionHint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryHint {
    pub x: f64,
    pub y: f64,
    pub k: i32,
}

/// Junction located by position; `n` is the number of quanta at the corner.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JunctionHint {
    pub x: f64,
    pub y: f64,
    pub n: i64,
}

impl HintsFile {
    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Resolves junction hints against the domain's junctions.
    pub fn to_hints(&self, domain: &DomainSpec) -> Result<ChargeHints, FormatError> {
        let tol = 1e-6 * domain.diameter();
        let mut hints = ChargeHints::default();
        for b in &self.boundary {
            let p = Point::new(b.x, b.y);
            if domain.boundary_distance(p) > tol {
                return Err(FormatError::Invalid(format!("boundary hint ({}, {}) is not on the boundary", b.x, b.y)));
            }
            hints.boundary.push(ConePoint::boundary(p, b.k));
        }
        for j in &self.junctions {
            let p = Point::new(j.x, j.y);
            let info = domain
                .junctions
                .iter()
                .find(|i| i.position.dist(p) <= tol)
                .ok_or_else(|| FormatError::Invalid(format!("no junction at ({}, {})", j.x, j.y)))?;
            let strength = conefield_core::conditions::junction_charge(info.theta_in, j.n, domain.q())
                .map_err(|e| FormatError::Invalid(e.to_string()))?;
            hints.junctions.push(JunctionCharge { position: info.position, theta_in: info.theta_in, n: j.n, strength });
        }
        Ok(hints)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SizeRow {
    #[serde(rename = "loop")]
    loop_index: usize,
    s: f64,
    size: f64,
}

/// Cell size F along each loop, linear in loop arclength and periodic.
#[derive(Clone, Debug, PartialEq)]
pub struct SizeTable {
    loops: Vec<Vec<(f64, f64)>>,
    lengths: Vec<f64>,
    offsets: Vec<Vec<f64>>,
}

impl SizeTable {
    /// Reads CSV with header `loop,s,size`, where s is the arclength from the
    /// start of the loop.
    pub fn read<R: Read>(r: R, domain: &DomainSpec) -> Result<Self, FormatError> {
        let mut loops = vec![Vec::new(); domain.loops.len()];
        for row in csv::Reader::from_reader(r).deserialize() {
            let row: SizeRow = row?;
            if row.loop_index >= loops.len() {
                return Err(FormatError::Invalid(format!("size table names loop {} of {}", row.loop_index, loops.len())));
            }
            if !(row.size > 0.0) {
                return Err(FormatError::Invalid(format!("size {} must be positive", row.size)));
            }
            loops[row.loop_index].push((row.s, row.size));
        }
        for (i, l) in loops.iter_mut().enumerate() {
            if l.is_empty() {
                return Err(FormatError::Invalid(format!("size table has no rows for loop {i}")));
            }
            l.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
        let lengths = domain.loops.iter().map(BoundaryLoop::length).collect();
        let offsets = domain
            .loops
            .iter()
            .map(|l| {
                let mut acc = 0.0;
                l.segments
                    .iter()
                    .map(|s| {
                        let o = acc;
                        acc += s.length();
                        o
                    })
                    .collect()
            })
            .collect();
        Ok(SizeTable { loops, lengths, offsets })
    }

    pub fn size(&self, bp: BoundaryPoint) -> f64 {
        let s = self.offsets[bp.loop_index][bp.segment] + bp.s;
        let rows = &self.loops[bp.loop_index];
        let len = self.lengths[bp.loop_index];
        if rows.len() == 1 {
            return rows[0].1;
        }
        let i = rows.partition_point(|r| r.0 <= s);
        let (a, b) = if i == 0 || i == rows.len() {
            // Wrap between the last and first rows.
            let (last, first) = (rows[rows.len() - 1], rows[0]);
            (last, (first.0 + len, first.1))
        } else {
            (rows[i - 1], rows[i])
        };
        let s = if s < a.0 { s + len } else { s };
        let t = if b.0 > a.0 { (s - a.0) / (b.0 - a.0) } else { 0.0 };
        a.1 + (b.1 - a.1) * t
    }
}
