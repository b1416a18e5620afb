use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use conefield::formats::DomainFile;
use conefield_core::geometry::rectangle;
use conefield_core::Quantum;

fn conefield(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conefield")).args(args).output().expect("spawn conefield")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn passing_preset_exits_zero() {
    let out = conefield(&["--preset", "annulus_sector"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));
}

#[test]
fn failing_conditions_exit_one() {
    let out = conefield(&["--preset", "diamond_pair", "--mode", "validate-only", "--field", "flat"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("4 fail"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&conefield(&[])), 2);
    assert_eq!(code(&conefield(&["--preset", "no_such_case"])), 2);
    assert_eq!(code(&conefield(&["--preset", "annulus_sector", "--tolerance", "quantization"])), 2);
}

#[test]
fn unreadable_input_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(code(&conefield(&["--input", missing.to_str().unwrap()])), 3);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    assert_eq!(code(&conefield(&["--input", bad.to_str().unwrap()])), 3);
}

#[test]
fn input_file_round_trip_through_cli() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("square.json");
    let doc = DomainFile::from_domain(&rectangle(0.0, 0.0, 1.0, 1.0, Quantum::Quad), &[]);
    fs::write(&input, doc.to_json().unwrap()).unwrap();
    let report = dir.path().join("report.json");
    let svg = dir.path().join("out.svg");
    let out = conefield(&[
        "--input",
        input.to_str().unwrap(),
        "--report-out",
        report.to_str().unwrap(),
        "--svg-out",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["pass"], serde_json::Value::Bool(true));
    assert!(fs::read_to_string(&svg).unwrap().contains("<svg "));
}

fn outputs(dir: &Path, preset: &str) -> (Vec<u8>, Vec<u8>) {
    let report = dir.join("r.json");
    let svg = dir.join("o.svg");
    let out = conefield(&["--preset", preset, "--seed", "3", "--report-out", report.to_str().unwrap(), "--svg-out", svg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    (fs::read(report).unwrap(), fs::read(svg).unwrap())
}

#[test]
fn runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for preset in ["annulus_sector", "diamond_pair"] {
        assert_eq!(outputs(a.path(), preset), outputs(b.path(), preset), "{preset}");
    }
}

/// Set CONEFIELD_UPDATE_GOLDEN=1 to rewrite the stored picture.
#[test]
fn annulus_svg_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let (_, svg) = outputs(dir.path(), "annulus_sector");
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/annulus_sector.svg");
    if std::env::var_os("CONEFIELD_UPDATE_GOLDEN").is_some() || !golden.exists() {
        fs::write(&golden, &svg).unwrap();
    }
    assert!(fs::read(&golden).unwrap() == svg, "SVG differs from {}", golden.display());
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

const SQUARE: &str = r#"{"loops":[{"segments":[
  {"kind":"line","points":[[0,0],[1,0]]},{"kind":"line","points":[[1,0],[1,1]]},
  {"kind":"line","points":[[1,1],[0,1]]},{"kind":"line","points":[[0,1],[0,0]]}]}]}"#;

#[test]
fn open_loop_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let open = write(
        dir.path(),
        "open.json",
        r#"{"loops":[{"segments":[{"kind":"line","points":[[0,0],[1,0]]},{"kind":"line","points":[[1,0],[1,1]]},{"kind":"line","points":[[1,1],[0,0.5]]}]}]}"#,
    );
    let out = conefield(&["--input", &open]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unbalanced_cones_exit_five() {
    // A lone k = −1 cone in a disk has no compatible Neumann solution.
    let out = conefield(&["--preset", "single_cone"]);
    assert_eq!(code(&out), 5);
    assert!(String::from_utf8_lossy(&out.stderr).contains("incompatible"));
}

#[test]
fn ambiguous_charge_count_exits_six() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "square.json", SQUARE);
    let sizes = write(dir.path(), "sizes.csv", "loop,s,size\n0,0,1\n0,1,5\n0,2,1e-9\n0,3,3\n");
    let out = conefield(&["--input", &input, "--mode", "inverse", "--size-table", &sizes]);
    assert_eq!(code(&out), 6, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unwritable_output_exits_seven() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("missing").join("r.json");
    assert_eq!(code(&conefield(&["--preset", "annulus_sector", "--report-out", target.to_str().unwrap()])), 7);
}
