use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fractal-avoid"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_config(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, v.to_string()).unwrap();
    p.to_str().unwrap().to_string()
}

fn reference() -> Value {
    serde_json::from_str(&std::fs::read_to_string(configs().join("reference.json")).unwrap()).unwrap()
}

#[test]
fn construct_verify_measure_export_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ref");
    let cfg = configs().join("reference.json");
    let o = run(&[
        "construct",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["trace.json", "measure.json", "certificates.json", "manifest.json"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let trace = out.join("trace.json");
    let t = trace.to_str().unwrap();
    let o = run(&["verify", "--trace", t, "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let o = run(&["dimension", "--trace", t]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("slope"));

    let m = out.join("m");
    let o = run(&["measure", "--trace", t, "--out", m.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(m.join("frostman.csv").exists());

    let plot = out.join("plot");
    let measure = out.join("measure.json");
    let args = [
        "export-plot",
        "--trace",
        t,
        "--measure",
        measure.to_str().unwrap(),
        "--out",
        plot.to_str().unwrap(),
    ];
    assert_eq!(code(&run(&args)), 0);
    let first = std::fs::read(plot.join("frostman.csv")).unwrap();
    assert_eq!(code(&run(&args)), 0);
    assert_eq!(std::fs::read(plot.join("frostman.csv")).unwrap(), first);
}

#[test]
fn verify_flags_injected_cube() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ref");
    let cfg = configs().join("reference.json");
    assert_eq!(
        code(&run(&[
            "construct",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap()
        ])),
        0
    );
    let mut t: Value = serde_json::from_str(&std::fs::read_to_string(out.join("trace.json")).unwrap()).unwrap();
    // level 1 is one cube at 2^-2; a cube outside it breaks nesting at level 2
    let level = &mut t["levels"][1]["indices"];
    let first = level[0][0].as_u64().unwrap();
    let outside = (first + (1 << 20)) % (1 << 22);
    let mut cubes: Vec<u64> = level
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v[0].as_u64().unwrap())
        .collect();
    cubes.push(outside);
    cubes.sort_unstable();
    cubes.dedup();
    *level = json!(cubes.iter().map(|c| [c]).collect::<Vec<_>>());
    let bad = write_config(dir.path(), "bad.json", &t);
    let o = run(&["verify", "--trace", &bad, "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("offending"));
}

#[test]
fn full_dimension_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = reference();
    c["alpha"] = json!(2.0);
    let p = write_config(dir.path(), "c.json", &c);
    let o = run(&[
        "construct",
        "--config",
        &p,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("X = ∅"));
}

#[test]
fn unparsable_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.json");
    std::fs::write(&p, "{ not json").unwrap();
    let o = run(&[
        "construct",
        "--config",
        p.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn hypothesis_failure_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let c = json!({
        "d": 1, "n": 2, "alpha": 1.0,
        "patterns": [{"type": "union", "parts": [
            {"type": "zeroset-linear", "coefficients": [1, -1]},
            {"type": "zeroset-linear", "coefficients": [1, 1], "constant": -1}
        ]}],
        "levels": 1, "count_slack": 1e6, "min_scale_exponent": 2, "max_scale_exponent": 2, "seed": 1
    });
    let p = write_config(dir.path(), "c.json", &c);
    let o = run(&[
        "construct",
        "--config",
        &p,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn scale_budget_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = reference();
    c["max_scale_exponent"] = json!(10);
    let p = write_config(dir.path(), "c.json", &c);
    let o = run(&[
        "construct",
        "--config",
        &p,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    // the certified prefix is still written
    assert!(dir.path().join("o/trace.json").exists());
}

#[test]
fn resample_failure_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let spec: Value = serde_json::from_str(&std::fs::read_to_string(configs().join("sumset.json")).unwrap()).unwrap();
    let mut c = spec["config"].clone();
    c["max_attempts"] = json!(1);
    let p = write_config(dir.path(), "c.json", &c);
    let o = run(&[
        "construct",
        "--config",
        &p,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 5, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn projection_route_below_d() {
    let dir = tempfile::tempdir().unwrap();
    let c = json!({
        "d": 1, "n": 2, "alpha": 0.5,
        "patterns": [{"type": "pointcloud", "dim": 2, "points": [[0.25, 0.5], [0.7, 0.1]]}],
        "levels": 1, "seed": 3
    });
    let p = write_config(dir.path(), "c.json", &c);
    let out = dir.path().join("o");
    let o = run(&["construct", "--config", &p, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let t: Value = serde_json::from_str(&std::fs::read_to_string(out.join("trace.json")).unwrap()).unwrap();
    assert_eq!(t["route"], json!("projection_complement"));
    assert_eq!(t["levels"].as_array().unwrap().len(), 1);
    let o = run(&["dimension", "--trace", out.join("trace.json").to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("no slope"));
}

#[test]
fn seed_flag_overrides_config_but_levels_do_not() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("reference.json");
    let out = dir.path().join("o");
    let o = run(&[
        "construct",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "7",
        "--levels",
        "1",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let t: Value = serde_json::from_str(&std::fs::read_to_string(out.join("trace.json")).unwrap()).unwrap();
    assert_eq!(t["seed"], json!(7));
    assert_eq!(t["levels"].as_array().unwrap().len(), 2);
}

#[test]
fn sumset_demo_and_wrong_n() {
    let dir = tempfile::tempdir().unwrap();
    let spec = configs().join("sumset.json");
    let o = run(&[
        "demo",
        "--config",
        spec.to_str().unwrap(),
        "--out",
        dir.path().join("s").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("s/report.json")).unwrap()).unwrap();
    assert_eq!(report["clean"], json!(true));

    let mut s: Value =
        serde_json::from_str(&std::fs::read_to_string(configs().join("isosceles.json")).unwrap()).unwrap();
    s["config"]["n"] = json!(2);
    let p = write_config(dir.path(), "iso.json", &s);
    let o = run(&["demo", "--config", &p, "--out", dir.path().join("i").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("three points"));
}

#[test]
fn estimate_reports_box_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(
        dir.path(),
        "p.json",
        &json!({"type": "cantor-product", "base": 3, "digits": [0, 2], "dim": 1}),
    );
    let o = run(&["estimate", "--config", &p, "--min-k", "4", "--max-k", "10"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&String::from_utf8_lossy(&o.stdout)).unwrap();
    let fitted = v["fitted"].as_f64().unwrap();
    assert!((fitted - 2f64.ln() / 3f64.ln()).abs() < 0.15, "{fitted}");
}
