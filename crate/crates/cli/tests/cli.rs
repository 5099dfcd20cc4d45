use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_modulus"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(format!("{name}.toml"))
}

fn tmp(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("modulus-cli-{}-{tag}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn run(sub: &str, path: &Path, out: &Path) -> Output {
    bin()
        .args([sub, "--scenario"])
        .arg(path)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn write_scenario(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("s.toml");
    std::fs::write(&p, text).unwrap();
    p
}

const SQUARE: &str = r#"schema = "modulus-scenario/1"
name = "sq"
command = "verify-theorem2"
p = 2.0
outputs = ["report", "heatmap", "grid", "csv"]

[mapping]
kind = "diagonal"
diagonal = [2.0, 1.0]

[family]
kind = "segment-bundle"
x0 = 0.0
x1 = 1.0
y0 = 0.0
y1 = 1.0
count = 32
samples = 33

[density]
kind = "extremal"

[source_grid]
resolution = 32

[image_grid]
resolution = [64, 32]
"#;

#[test]
fn passing_run_exits_zero_and_heatmap_matches_report() {
    let d = tmp("pass");
    let o = run("run", &write_scenario(&d, SQUARE), &d);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.join("sq.json")).unwrap()).unwrap();
    let svg = std::fs::read_to_string(d.join("sq.svg")).unwrap();
    let attr = |k: &str| -> f64 {
        let start = svg.find(&format!("{k}=\"")).unwrap() + k.len() + 2;
        svg[start..].split('"').next().unwrap().parse().unwrap()
    };
    let dens = &report["result"]["rho_tilde"];
    assert_eq!(attr("data-min"), dens["min"].as_f64().unwrap());
    assert_eq!(attr("data-max"), dens["max"].as_f64().unwrap());

    let grid = std::fs::read_to_string(d.join("sq.grid")).unwrap();
    let rho = modulus_core::io::density_from_grid_text(&grid).unwrap();
    assert_eq!(rho.grid().resolution(), &[64, 32]);
    assert_eq!(rho.max(), dens["max"].as_f64().unwrap());
    assert!(std::fs::read_to_string(d.join("sq.csv"))
        .unwrap()
        .contains("result.lhs"));
}

#[test]
fn failed_assertion_exits_one_and_names_residual() {
    let d = tmp("fail");
    // curved cell boundaries leave a change-of-variables residual far above 1e-15
    let text = std::fs::read_to_string(scenario("annulus-z2-m3-winding"))
        .unwrap()
        .replace("m = 3", "m = 2")
        + "\n[verify]\nchange_of_variables_tol = 1e-15\n";
    let o = run("verify", &write_scenario(&d, &text), &d);
    assert_eq!(
        o.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("change_of_variables"), "{err}");
}

#[test]
fn inadmissible_density_is_a_precondition_error() {
    let d = tmp("inadm");
    let text = SQUARE.replace("kind = \"extremal\"", "kind = \"constant\"\nvalue = 0.5");
    let o = run("run", &write_scenario(&d, &text), &d);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not admissible"));
}

#[test]
fn wrong_winding_exits_two() {
    let d = tmp("wind");
    let o = run("run", &scenario("annulus-z2-m3-winding"), &d);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("winding"));
}

#[test]
fn config_errors_name_the_key() {
    let d = tmp("cfg");
    let cases = [
        (
            SQUARE.replace("count = 32", "count = 32\ncolour = 1"),
            "colour",
        ),
        (SQUARE.replace("p = 2.0", "p = 0.5"), "`p`"),
        (
            SQUARE.replace("diagonal = [2.0, 1.0]", ""),
            "mapping.diagonal",
        ),
        (
            SQUARE.replace("modulus-scenario/1", "modulus-scenario/9"),
            "schema",
        ),
        (
            SQUARE.replace("[density]\nkind = \"extremal\"\n", ""),
            "density",
        ),
    ];
    for (text, key) in cases {
        let o = run("run", &write_scenario(&d, &text), &d);
        assert_eq!(o.status.code(), Some(2));
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(key), "expected {key} in: {err}");
    }
}

#[test]
fn empty_family_has_zero_modulus() {
    let d = tmp("empty");
    let o = run("compute-modulus", &scenario("empty-family"), &d);
    assert_eq!(o.status.code(), Some(0));
    let r: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.join("empty-family.json")).unwrap()).unwrap();
    assert_eq!(r["result"]["value"], 0.0);
}

#[test]
fn sweep_writes_merged_csv_and_keeps_going_after_errors() {
    let d = tmp("sweep");
    let text = r#"schema = "modulus-scenario/1"
name = "sw"
command = "sweep"

[mapping]
kind = "power"
exponent = 1
domain = { inner = 1.0, outer = 2.0 }

[family]
kind = "separating-circles"
inner_radius = 1.0
outer_radius = 2.0
count = 20
samples = 800

[density]
kind = "constant"
value = 1.0

[source_grid]
resolution = 24

[image_grid]
resolution = 24

[sweep]
command = "verify-theorem2"
m = [1, 2]
"#;
    let o = bin()
        .args(["sweep", "--jobs", "2", "--scenario"])
        .arg(write_scenario(&d, text))
        .arg("--out")
        .arg(&d)
        .output()
        .unwrap();
    // constant 1 is admissible for circles of length ≥ 2π
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let csv = std::fs::read_to_string(d.join("sw.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3, "{csv}");
    assert!(csv.lines().next().unwrap().contains("wall_time_s"));
    assert!(d.join("sw-0.json").exists() && d.join("sw-1.json").exists());

    // a radial stretch winds each circle once, so the m = 2 row stops with
    // an error while the m = 1 row still runs
    let bad = text.replace(
        "kind = \"power\"\nexponent = 1",
        "kind = \"radial-stretch\"\nexponent = 2.0",
    );
    let o = bin()
        .args(["sweep", "--scenario"])
        .arg(write_scenario(&d, &bad))
        .arg("--out")
        .arg(&d)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("winding"));
    let csv = std::fs::read_to_string(d.join("sw.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(
        rows[1].contains("true") && rows[2].contains("winding"),
        "{csv}"
    );
}

#[test]
fn catalog_lists_mappings() {
    let o = bin().arg("catalog").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("z^2"));
}
