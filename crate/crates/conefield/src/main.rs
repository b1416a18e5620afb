use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, ValueEnum};
use conefield::run::{run, FieldChoice, Mode, RunConfig, RunError, Source};
use conefield_core::conditions::Tolerances;
use conefield_core::Quantum;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum QuantumArg {
    Quad,
    Tri,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Direct,
    Inverse,
    ValidateOnly,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FieldArg {
    Reference,
    Flat,
}

/// Cone singularity placement and geodesic tracing for cross fields.
#[derive(Debug, Parser)]
#[command(name = "conefield", version)]
#[command(group(ArgGroup::new("source").required(true).args(["input", "preset"])))]
struct Cli {
    /// Domain description (JSON).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Built-in case: annulus_sector, single_cone, junction_wedge, diamond_pair,
    /// case_c, revolution_sphere, revolution_cylinder, revolution_cone.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, value_enum, default_value = "direct")]
    mode: ModeArg,
    /// Field checked in validate-only mode.
    #[arg(long, value_enum, default_value = "reference")]
    field: FieldArg,
    #[arg(long, value_enum)]
    quantum: Option<QuantumArg>,
    #[arg(long)]
    mesh_h: Option<f64>,
    /// Read the background mesh instead of triangulating.
    #[arg(long)]
    mesh_in: Option<PathBuf>,
    /// Manifold spacing of boundary-seeded geodesics.
    #[arg(long, default_value_t = 1.0)]
    spacing: f64,
    /// Boundary cell sizes, CSV `loop,s,size`.
    #[arg(long)]
    size_table: Option<PathBuf>,
    /// Junction and boundary charge hints (JSON).
    #[arg(long)]
    charges: Option<PathBuf>,
    /// Override a tolerance: quantization=, residual-nodal= or residual-analytic=.
    #[arg(long, value_name = "KEY=VALUE")]
    tolerance: Vec<String>,
    /// Seed for the random path-consistency spot checks.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 400)]
    max_paths: usize,
    #[arg(long)]
    svg_out: Option<PathBuf>,
    #[arg(long)]
    report_out: Option<PathBuf>,
    #[arg(long)]
    field_out: Option<PathBuf>,
    #[arg(long)]
    mesh_out: Option<PathBuf>,
    #[arg(long)]
    cauchy_out: Option<PathBuf>,
}

fn tolerances(args: &[String]) -> Result<Tolerances, RunError> {
    let mut t = Tolerances::default();
    for a in args {
        let (k, v) = a.split_once('=').ok_or_else(|| RunError::Usage(format!("--tolerance expects KEY=VALUE, got {a:?}")))?;
        let v: f64 = v.parse().map_err(|_| RunError::Usage(format!("bad tolerance value {v:?}")))?;
        match k {
            "quantization" => t.quantization = v,
            "residual-nodal" => t.residual_nodal = v,
            "residual-analytic" => t.residual_analytic = v,
            _ => return Err(RunError::Usage(format!("unknown tolerance {k:?}"))),
        }
    }
    Ok(t)
}

fn config(cli: Cli) -> Result<RunConfig, RunError> {
    let source = match (cli.input, cli.preset) {
        (Some(p), None) => Source::Input(p),
        (None, Some(n)) => Source::Preset(n),
        _ => return Err(RunError::Usage("give exactly one of --input and --preset".into())),
    };
    let mode = match cli.mode {
        ModeArg::Direct => Mode::Direct,
        ModeArg::Inverse => Mode::Inverse,
        ModeArg::ValidateOnly => Mode::ValidateOnly,
    };
    let mut cfg = RunConfig::new(source, mode);
    cfg.field = match cli.field {
        FieldArg::Reference => FieldChoice::Reference,
        FieldArg::Flat => FieldChoice::Flat,
    };
    cfg.quantum = cli.quantum.map(|q| match q {
        QuantumArg::Quad => Quantum::Quad,
        QuantumArg::Tri => Quantum::Tri,
    });
    cfg.mesh_h = cli.mesh_h;
    cfg.mesh_in = cli.mesh_in;
    cfg.spacing = cli.spacing;
    cfg.size_table = cli.size_table;
    cfg.charges = cli.charges;
    cfg.tolerances = tolerances(&cli.tolerance)?;
    cfg.seed = cli.seed;
    cfg.max_paths = cli.max_paths;
    cfg.svg_out = cli.svg_out;
    cfg.report_out = cli.report_out;
    cfg.field_out = cli.field_out;
    cfg.mesh_out = cli.mesh_out;
    cfg.cauchy_out = cli.cauchy_out;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CONEFIELD_LOG", "warn")).format_timestamp_millis().init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = config(cli).and_then(|cfg| run(&cfg));
    match result {
        Ok(out) => {
            let r = &out.report;
            if let Some(c) = &r.conditions {
                println!(
                    "conditions: 1 {} 2 {} 3 {} 4 {}",
                    verdict(c.condition1_pass),
                    verdict(c.condition2_pass),
                    verdict(c.condition3_pass),
                    verdict(c.condition4_pass)
                );
            }
            if let Some(rec) = &r.recovered {
                for (p, k) in rec.positions.iter().zip(&rec.k) {
                    println!("recovered k={k} at ({:.6}, {:.6})", p.x, p.y);
                }
            }
            if let Some(rev) = &r.revolution {
                for p in &rev.case.poles {
                    println!("pole z={:.6} k={} charge={:.6}", p.z, p.k, p.charge);
                }
            }
            for n in &r.notes {
                println!("note: {n}");
            }
            println!("{}", if r.pass { "PASS" } else { "FAIL" });
            ExitCode::from(out.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("conefield: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn verdict(b: bool) -> &'static str {
    if b {
        "pass"
    } else {
        "fail"
    }
}
