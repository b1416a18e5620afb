//! The end-to-end driver: load, solve or recover, validate, trace, emit.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use conefield_core::analytic_cases::{self, regular_part_for, revolution_surface, AnalyticCase, CaseError, RevolutionCase};
use conefield_core::background_solver::{triangulate, BackgroundSolver, MeshError, SolveError, TriMesh};
use conefield_core::conditions::{check_all, ConditionError, ConditionReport, Tolerances};
use conefield_core::geodesics::{seed_boundary_family, star_geodesics, GeodesicPath, Termination, TraceOptions};
use conefield_core::geometry::{validate_domain, BoundaryPoint, GeometryError};
use conefield_core::inverse_poisson::{
    assemble_boundary_data, solve_pipeline_with, ChargeHints, InverseError, PipelineOptions, RecoveredCharges,
};
use conefield_core::phi_field::{HarmonicPart, PhiError};
use conefield_core::{ConeClass, ConePoint, DomainSpec, PhiField, Point, Quantum};
use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::formats::{read_mesh, write_cauchy, write_mesh, ConeEntry, DomainFile, FieldDump, FormatError, HintsFile, SizeTable};
use crate::paths::{consistency_check, ConsistencyCheck};
use crate::svg::{emit_svg, Marker};

#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    Preset(String),
    Input(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Charges are given; solve for the regular part.
    Direct,
    /// Recover interior charges from boundary data.
    Inverse,
    /// Check a field as it stands.
    ValidateOnly,
}

/// Which field validate-only mode checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldChoice {
    /// The preset's own field, or the given cones for an input file.
    Reference,
    /// φ = const.
    Flat,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub source: Source,
    pub mode: Mode,
    pub field: FieldChoice,
    pub quantum: Option<Quantum>,
    pub mesh_h: Option<f64>,
    pub mesh_in: Option<PathBuf>,
    pub spacing: f64,
    pub tolerances: Tolerances,
    pub charges: Option<PathBuf>,
    pub size_table: Option<PathBuf>,
    pub seed: u64,
    pub svg_out: Option<PathBuf>,
    pub report_out: Option<PathBuf>,
    pub field_out: Option<PathBuf>,
    pub mesh_out: Option<PathBuf>,
    pub cauchy_out: Option<PathBuf>,
    /// Upper bound on traced geodesics.
    pub max_paths: usize,
}

impl RunConfig {
    pub fn new(source: Source, mode: Mode) -> Self {
        RunConfig {
            source,
            mode,
            field: FieldChoice::Reference,
            quantum: None,
            mesh_h: None,
            mesh_in: None,
            spacing: 1.0,
            tolerances: Tolerances::default(),
            charges: None,
            size_table: None,
            seed: 0,
            svg_out: None,
            report_out: None,
            field_out: None,
            mesh_out: None,
            cauchy_out: None,
            max_paths: 400,
        }
    }

    pub fn check(&self) -> Result<(), RunError> {
        if let Some(h) = self.mesh_h {
            if !(h > 0.0) {
                return Err(RunError::Usage(format!("--mesh-h must be positive, got {h}")));
            }
        }
        if !(self.spacing > 0.0) {
            return Err(RunError::Usage(format!("--spacing must be positive, got {}", self.spacing)));
        }
        let t = &self.tolerances;
        if !(t.quantization > 0.0 && t.residual_nodal > 0.0 && t.residual_analytic > 0.0) {
            return Err(RunError::Usage("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Failure classes, each with its own exit status.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("input: {0}")]
    Input(String),
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("solver: {0}")]
    Solver(String),
    #[error("inverse problem: {0}")]
    Inverse(String),
    #[error("output: {0}")]
    Output(String),
}

/// Exit status when every condition holds.
pub const EXIT_PASS: i32 = 0;
/// Exit status when the run completed but a condition failed.
pub const EXIT_CONDITIONS: i32 = 1;

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Usage(_) => 2,
            RunError::Input(_) => 3,
            RunError::Geometry(_) => 4,
            RunError::Solver(_) => 5,
            RunError::Inverse(_) => 6,
            RunError::Output(_) => 7,
        }
    }
}

impl From<GeometryError> for RunError {
    fn from(e: GeometryError) -> Self {
        RunError::Geometry(e.to_string())
    }
}

impl From<MeshError> for RunError {
    fn from(e: MeshError) -> Self {
        RunError::Solver(e.to_string())
    }
}

impl From<SolveError> for RunError {
    fn from(e: SolveError) -> Self {
        RunError::Solver(e.to_string())
    }
}

impl From<PhiError> for RunError {
    fn from(e: PhiError) -> Self {
        RunError::Solver(e.to_string())
    }
}

impl From<ConditionError> for RunError {
    fn from(e: ConditionError) -> Self {
        RunError::Solver(e.to_string())
    }
}

impl From<InverseError> for RunError {
    fn from(e: InverseError) -> Self {
        match e {
            InverseError::Mesh(m) => m.into(),
            InverseError::Solve(s) => s.into(),
            other => RunError::Inverse(other.to_string()),
        }
    }
}

impl From<CaseError> for RunError {
    fn from(e: CaseError) -> Self {
        match e {
            CaseError::Geometry(g) => g.into(),
            CaseError::Parameter(p) => RunError::Usage(p),
            other => RunError::Solver(other.to_string()),
        }
    }
}

fn input_err(path: &Path, e: impl std::fmt::Display) -> RunError {
    RunError::Input(format!("{}: {e}", path.display()))
}

fn format_err(path: &Path, e: FormatError) -> RunError {
    match e {
        FormatError::Geometry(g) => g.into(),
        other => input_err(path, other),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub origin: String,
    pub termination: Termination,
    pub length: f64,
    pub manifold_length: f64,
    pub points: Vec<[f64; 2]>,
}

impl PathRecord {
    fn new(origin: String, p: &GeodesicPath) -> Self {
        PathRecord {
            origin,
            termination: p.termination,
            length: p.length(),
            manifold_length: p.manifold_length(),
            points: p.samples.iter().map(|s| [s.position.x, s.position.y]).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RevolutionReport {
    pub case: RevolutionCase,
    pub poles_quantized: bool,
    pub geodesics_verified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub source: String,
    pub mode: Mode,
    pub quantum: Quantum,
    pub mesh_vertices: Option<usize>,
    pub constant: f64,
    pub cones: Vec<ConeEntry>,
    pub conditions: Option<ConditionReport>,
    pub recovered: Option<RecoveredCharges>,
    pub consistency: Option<ConsistencyCheck>,
    pub revolution: Option<RevolutionReport>,
    pub geodesics: Vec<PathRecord>,
    pub pass: bool,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub svg: String,
    pub field: Option<PhiField>,
    pub domain: Option<DomainSpec>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.report.pass {
            EXIT_PASS
        } else {
            EXIT_CONDITIONS
        }
    }
}

/// Loaded problem: the domain, a reference field when one is known, and the
/// cones given with the input.
struct Problem {
    name: String,
    domain: DomainSpec,
    reference: Option<PhiField>,
    cones: Vec<ConePoint>,
}

fn load_problem(cfg: &RunConfig) -> Result<Problem, RunError> {
    match &cfg.source {
        Source::Preset(name) => {
            let case: AnalyticCase = match analytic_cases::preset(name, cfg.mesh_h) {
                Some(r) => r?,
                None => return Err(RunError::Usage(format!("unknown preset {name:?}"))),
            };
            if cfg.quantum.is_some_and(|q| q != case.domain.quantum) {
                return Err(RunError::Usage(format!("preset {name} is defined for {} crosses", case.domain.quantum.name())));
            }
            let cones = case.field.cones.clone();
            Ok(Problem { name: name.clone(), domain: case.domain, reference: Some(case.field), cones })
        }
        Source::Input(path) => {
            let text = fs::read_to_string(path).map_err(|e| input_err(path, e))?;
            let file = DomainFile::from_json(&text).map_err(|e| input_err(path, e))?;
            let domain = file.to_domain(cfg.quantum).map_err(|e| format_err(path, e))?;
            if let Some(d) = validate_domain(&domain).first() {
                return Err(RunError::Geometry(format!("{}: {d}", path.display())));
            }
            Ok(Problem { name: path.display().to_string(), domain, reference: None, cones: file.cones() })
        }
    }
}

fn load_hints(cfg: &RunConfig, domain: &DomainSpec) -> Result<ChargeHints, RunError> {
    match &cfg.charges {
        None => Ok(ChargeHints::default()),
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| input_err(path, e))?;
            HintsFile::from_json(&text).and_then(|h| h.to_hints(domain)).map_err(|e| input_err(path, e))
        }
    }
}

fn build_solver(cfg: &RunConfig, domain: &DomainSpec) -> Result<BackgroundSolver, RunError> {
    let mesh: TriMesh = match &cfg.mesh_in {
        Some(path) => {
            let f = fs::File::open(path).map_err(|e| input_err(path, e))?;
            read_mesh(std::io::BufReader::new(f)).map_err(|e| input_err(path, e))?
        }
        None => triangulate(domain, cfg.mesh_h.unwrap_or(domain.diameter() / 50.0))?,
    };
    Ok(BackgroundSolver::new(Arc::new(mesh))?)
}

type SizeFn = Box<dyn Fn(BoundaryPoint) -> f64>;

/// Boundary cell size: an explicit table, e^{−φ} of the reference field, or 1.
fn size_function(cfg: &RunConfig, problem: &Problem) -> Result<Option<SizeFn>, RunError> {
    if let Some(path) = &cfg.size_table {
        let f = fs::File::open(path).map_err(|e| input_err(path, e))?;
        let t = SizeTable::read(f, &problem.domain).map_err(|e| input_err(path, e))?;
        return Ok(Some(Box::new(move |bp| t.size(bp))));
    }
    if let Some(r) = &problem.reference {
        let r = r.clone();
        return Ok(Some(Box::new(move |bp: BoundaryPoint| r.eval_phi(bp.position).map(|v| (-v).exp()).unwrap_or(f64::NAN))));
    }
    Ok(None)
}

/// Additive constant matching −ln F in the boundary mean.
fn fit_constant(field: &PhiField, domain: &DomainSpec, size: &dyn Fn(BoundaryPoint) -> f64) -> Result<f64, RunError> {
    let data = assemble_boundary_data(domain, size, &ChargeHints::default())?;
    let (mut num, mut den) = (0.0, 0.0);
    for s in &data.samples {
        let Ok(v) = field.eval_phi(s.position) else { continue };
        num += s.weight * (s.phi - v);
        den += s.weight;
    }
    Ok(if den > 0.0 { num / den } else { 0.0 })
}

fn trace_all(field: &PhiField, domain: &DomainSpec, cfg: &RunConfig, notes: &mut Vec<String>) -> Vec<PathRecord> {
    let mut opts = TraceOptions::for_domain(domain);
    opts.max_s = 4.0 * domain.diameter();
    let mut out = Vec::new();
    for (ci, c) in field.cones.iter().enumerate() {
        if c.class != ConeClass::Interior || c.k + field.quantum.directions() <= 0 {
            continue;
        }
        match star_geodesics(field, domain, ci, &opts) {
            Ok(paths) => out.extend(paths.iter().enumerate().map(|(b, p)| PathRecord::new(format!("star {ci}.{b}"), p))),
            Err(e) => notes.push(format!("star geodesics of cone {ci}: {e}")),
        }
    }
    'outer: for (li, l) in domain.loops.iter().enumerate() {
        for si in 0..l.segments.len() {
            match seed_boundary_family(field, domain, li, si, cfg.spacing, &opts) {
                Ok(paths) => {
                    for (j, p) in paths.iter().enumerate() {
                        if out.len() >= cfg.max_paths {
                            notes.push(format!("geodesic output truncated at {} paths", cfg.max_paths));
                            break 'outer;
                        }
                        out.push(PathRecord::new(format!("boundary {li}.{si}.{j}"), p));
                    }
                }
                Err(e) => notes.push(format!("family on loop {li} segment {si}: {e}")),
            }
        }
    }
    out
}

fn revolution_run(cfg: &RunConfig, name: &str) -> Result<Option<RunOutcome>, RunError> {
    let Some(meridian) = analytic_cases::revolution_preset(name) else { return Ok(None) };
    let quantum = cfg.quantum.unwrap_or(Quantum::Quad);
    let case = revolution_surface(meridian, 24.0, quantum, 256)?;
    let poles_quantized = case.poles.iter().all(|p| (p.charge - p.k as f64 * quantum.value()).abs() < 1e-9);
    let geodesics_verified = case.max_tilde_kappa <= 1e-8;
    let pass = poles_quantized && geodesics_verified;
    // The profile curve (r, z) stands in for the domain picture.
    let profile: Vec<Point> = case.samples.iter().map(|s| Point::new(s.r, -s.z)).collect();
    let svg = profile_svg(&profile, &case);
    let report = RunReport {
        source: name.to_string(),
        mode: cfg.mode,
        quantum,
        mesh_vertices: None,
        constant: case.constant,
        cones: Vec::new(),
        conditions: None,
        recovered: None,
        consistency: None,
        revolution: Some(RevolutionReport { case, poles_quantized, geodesics_verified }),
        geodesics: Vec::new(),
        pass,
        notes: Vec::new(),
    };
    Ok(Some(RunOutcome { report, svg, field: None, domain: None }))
}

fn profile_svg(profile: &[Point], case: &RevolutionCase) -> String {
    let mut pts = profile.to_vec();
    for p in &case.poles {
        pts.push(Point::new(0.0, -p.z));
    }
    let (mut lo, mut hi) = (Point::new(0.0, f64::INFINITY), Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
    for p in &pts {
        lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let square = conefield_core::geometry::polygon_loop(&[lo, Point::new(hi.x, lo.y), hi, Point::new(lo.x, hi.y)]);
    let frame = DomainSpec::new(vec![square], Quantum::Quad).expect("profile frame");
    let markers: Vec<Marker> = case.poles.iter().map(|p| Marker { position: Point::new(0.0, -p.z), k: p.k as i32, filled: true }).collect();
    emit_svg(&frame, &[profile.to_vec()], &markers)
}

/// Runs the configured pipeline. Condition failures are reported through the
/// outcome; errors cover everything that prevents a report.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome, RunError> {
    cfg.check()?;
    if let Source::Preset(name) = &cfg.source {
        if let Some(out) = revolution_run(cfg, name)? {
            write_outputs(cfg, &out)?;
            return Ok(out);
        }
    }
    let problem = load_problem(cfg)?;
    let domain = &problem.domain;
    let hints = load_hints(cfg, domain)?;
    let mut notes = Vec::new();
    let mut recovered = None;
    let mut mesh_vertices = None;
    let mut solver_mesh = None;
    let field = match cfg.mode {
        Mode::ValidateOnly => {
            let mut f = PhiField::new(domain.quantum, domain.diameter());
            match (cfg.field, &problem.reference) {
                (FieldChoice::Reference, Some(r)) => f = r.clone(),
                (FieldChoice::Reference, None) => {
                    for c in &problem.cones {
                        f = f.with_cone(*c);
                    }
                }
                (FieldChoice::Flat, _) => {}
            }
            for c in &hints.boundary {
                f = f.with_cone(*c);
            }
            for j in &hints.junctions {
                f = f.with_junction_charge(*j);
            }
            f
        }
        Mode::Direct => {
            let solver = build_solver(cfg, domain)?;
            mesh_vertices = Some(solver.mesh().vertices.len());
            let mut charges = PhiField::new(domain.quantum, domain.diameter());
            for c in problem.cones.iter().chain(&hints.boundary) {
                charges = charges.with_cone(*c);
            }
            let junctions = problem.reference.as_ref().map(|r| r.junction_charges.clone()).unwrap_or_default();
            for j in junctions.iter().chain(&hints.junctions) {
                charges = charges.with_junction_charge(*j);
            }
            let f = regular_part_for(&solver, domain, charges)?;
            solver_mesh = Some(solver.mesh().clone());
            match size_function(cfg, &problem)? {
                Some(size) => {
                    let c = fit_constant(&f, domain, &*size)?;
                    f.with_constant(c)
                }
                None => f,
            }
        }
        Mode::Inverse => {
            let solver = build_solver(cfg, domain)?;
            mesh_vertices = Some(solver.mesh().vertices.len());
            let size = size_function(cfg, &problem)?.unwrap_or_else(|| Box::new(|_| 1.0));
            let mut hints = hints.clone();
            if let Some(r) = &problem.reference {
                hints.junctions.extend(r.junction_charges.iter().copied());
                hints.boundary.extend(r.cones.iter().filter(|c| c.class != ConeClass::Interior).copied());
            }
            let mut opts = PipelineOptions::for_domain(domain);
            opts.tolerances = cfg.tolerances;
            let res = solve_pipeline_with(&solver, domain, &*size, &hints, &opts)?;
            if let Some(path) = &cfg.cauchy_out {
                let f = fs::File::create(path).map_err(|e| RunError::Output(format!("{}: {e}", path.display())))?;
                write_cauchy(&res.data, f).map_err(|e| RunError::Output(e.to_string()))?;
            }
            notes.extend(res.recovered.notes.iter().cloned());
            recovered = Some(res.recovered);
            solver_mesh = Some(solver.mesh().clone());
            res.field
        }
    };
    let conditions = check_all(&field, domain, &cfg.tolerances)?;
    info!("conditions: {}", if conditions.pass { "pass" } else { "fail" });
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let consistency = if conditions.pass { Some(consistency_check(&field, domain, 10, 10, &mut rng)) } else { None };
    info!("consistency checked");
    let geodesics = trace_all(&field, domain, cfg, &mut notes);
    info!("traced {} geodesics", geodesics.len());
    let mut markers: Vec<Marker> = problem.cones.iter().map(|c| Marker { position: c.position, k: c.k, filled: true }).collect();
    if let Some(r) = &recovered {
        markers.extend(r.positions.iter().zip(&r.k).map(|(p, k)| Marker { position: *p, k: *k as i32, filled: false }));
    } else if cfg.mode == Mode::ValidateOnly && cfg.field == FieldChoice::Flat {
        markers.clear();
    }
    let paths: Vec<Vec<Point>> = geodesics.iter().map(|g| g.points.iter().map(|p| Point::new(p[0], p[1])).collect()).collect();
    let svg = emit_svg(domain, &paths, &markers);
    let pass = conditions.pass && recovered.as_ref().is_none_or(RecoveredCharges::all_quantized);
    if !pass {
        warn!("report does not pass");
    }
    let report = RunReport {
        source: problem.name.clone(),
        mode: cfg.mode,
        quantum: domain.quantum,
        mesh_vertices,
        constant: field.constant,
        cones: field.cones.iter().map(ConeEntry::from_cone).collect(),
        conditions: Some(conditions),
        recovered,
        consistency,
        revolution: None,
        geodesics,
        pass,
        notes,
    };
    let out = RunOutcome { report, svg, field: Some(field), domain: Some(problem.domain.clone()) };
    if let (Some(path), Some(mesh)) = (&cfg.mesh_out, &solver_mesh) {
        let f = fs::File::create(path).map_err(|e| RunError::Output(format!("{}: {e}", path.display())))?;
        write_mesh(mesh, std::io::BufWriter::new(f)).map_err(|e| RunError::Output(e.to_string()))?;
    }
    write_outputs(cfg, &out)?;
    Ok(out)
}

fn write_outputs(cfg: &RunConfig, out: &RunOutcome) -> Result<(), RunError> {
    let write = |path: &Path, text: &str| fs::write(path, text).map_err(|e| RunError::Output(format!("{}: {e}", path.display())));
    if let Some(p) = &cfg.report_out {
        let text = serde_json::to_string_pretty(&out.report).map_err(|e| RunError::Output(e.to_string()))?;
        write(p, &text)?;
    }
    if let Some(p) = &cfg.svg_out {
        write(p, &out.svg)?;
    }
    if let Some(p) = &cfg.field_out {
        match &out.field {
            Some(f) => {
                let text = serde_json::to_string_pretty(&FieldDump::from_field(f)).map_err(|e| RunError::Output(e.to_string()))?;
                write(p, &text)?;
            }
            None => warn!("no planar field to dump"),
        }
    }
    Ok(())
}

/// True when a nodal regular part is present.
pub fn has_nodal_part(f: &PhiField) -> bool {
    matches!(f.harmonic, HarmonicPart::Nodal(_))
}
