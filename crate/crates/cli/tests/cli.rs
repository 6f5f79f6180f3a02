use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

const SYS2: &str = r#"{"n": 2, "a": [[2, 1], [1, 2]], "m": [1, 1]}"#;

fn sys2() -> Value {
    serde_json::from_str(SYS2).unwrap()
}

fn run_in(dir: &Path, cmd: &str, config: &Value, envs: &[(&str, &str)]) -> Output {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    let mut c = Command::new(env!("CARGO_BIN_EXE_beckner"));
    c.arg(cmd).arg(&path).env_remove("BECKNER_THREADS");
    for (k, v) in envs {
        c.env(k, v);
    }
    c.output().unwrap()
}

fn run(dir: &Path, cmd: &str, config: &Value) -> Output {
    run_in(dir, cmd, config, &[])
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn small_run(output_dir: &str) -> Value {
    json!({
        "system": sys2(),
        "grid": {"extents": [1.0, 1.0], "resolution": [8, 8]},
        "seed": 11,
        "separation_rho": 0.1,
        "output_dir": output_dir,
        "experiment": {
            "estimate_c": {
                "rhos": [0.1, 0.2],
                "optimizer": {"starts": 3, "iterations": 30}
            },
            "verify": {"samples": 4000, "rays": 50},
            "coarea": {"resolutions": [16, 32]}
        }
    })
}

#[test]
fn check_reports_kappa_star() {
    let tmp = TempDir::new().unwrap();
    let o = run(
        tmp.path(),
        "check",
        &json!({"system": sys2(), "output_dir": "out"}),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rep = read_json(tmp.path().join("out/admissibility.json"));
    assert!((rep["kappa_star"].as_f64().unwrap() - 0.5).abs() < 1e-15);
    let summary = std::fs::read_to_string(tmp.path().join("out/check_summary.txt")).unwrap();
    assert!(summary.contains("admissible = true"));
}

#[test]
fn cuboid_on_inadmissible_system_is_a_successful_analysis() {
    let tmp = TempDir::new().unwrap();
    let cfg = json!({"system": {"n": 2, "a": [[1, 2], [2, 1]], "m": [1, 1]}, "output_dir": "out"});
    let o = run(tmp.path(), "cuboid", &cfg);
    assert_eq!(code(&o), 0);
    let rep = read_json(tmp.path().join("out/cuboid.json"));
    assert_eq!(rep["is_cuboid"], json!(false));
}

#[test]
fn blowup_ratio_column_is_k() {
    let tmp = TempDir::new().unwrap();
    let cfg = json!({
        "system": {"n": 1, "a": [[1]], "m": [1]},
        "grid": {"extents": [1.0], "resolution": [16]},
        "output_dir": "out",
        "experiment": {"blowup": {"steps": 8}}
    });
    let o = run(tmp.path(), "blowup", &cfg);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("out/blowup.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "k,lhs,rhs,ratio");
    let rows: Vec<(usize, f64)> = lines
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            (c[0].parse().unwrap(), c[3].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 8);
    // At k = 1 the field is the degenerate state itself and both sides vanish.
    assert_eq!(rows[0], (1, 0.0));
    for &(k, ratio) in &rows[1..] {
        assert!(
            (ratio - k as f64).abs() <= 1e-12 * k as f64,
            "k = {k}: {ratio}"
        );
    }
}

#[test]
fn estimate_and_verify_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    for cmd in ["estimate-c", "verify"] {
        let a = run(tmp.path(), cmd, &small_run("a"));
        assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
        let b = run_in(
            tmp.path(),
            cmd,
            &small_run("b"),
            &[("BECKNER_THREADS", "1")],
        );
        assert_eq!(code(&b), 0);
        assert_eq!(a.stdout, b.stdout);
    }
    let (fa, fb) = (files(&tmp.path().join("a")), files(&tmp.path().join("b")));
    assert_eq!(fa, fb);
    for name in [
        "c_curve.csv",
        "trace_rho0.csv",
        "trace_rho1.csv",
        "verify_gstab.csv",
    ] {
        assert!(fa.contains_key(name), "{name} missing");
    }
}

#[test]
fn report_writes_only_inside_output_dir() {
    let tmp = TempDir::new().unwrap();
    let o = run(tmp.path(), "report", &small_run("out"));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let top: Vec<String> = files_or_dirs(tmp.path());
    assert_eq!(top, ["config.json", "out"]);
    let out = files(&tmp.path().join("out"));
    for cmd in [
        "check",
        "states",
        "cuboid",
        "sigma",
        "coarea",
        "isoperimetric",
        "regimes",
        "blowup",
        "estimate_c",
        "verify",
        "entropy",
        "report",
    ] {
        assert!(out.contains_key(&format!("{cmd}_summary.txt")), "{cmd}");
    }
    let report = String::from_utf8(out["report_summary.txt"].clone()).unwrap();
    assert!(report.contains("[verify]\nstatus = passed"));
}

fn files_or_dirs(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

#[test]
fn maximizer_dump_feeds_back_as_a_field() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&run(tmp.path(), "estimate-c", &small_run("out"))), 0);
    let mut cfg = small_run("again");
    cfg["experiment"]["entropy"] = json!({"kind": "csv", "path": "out/maximizer_rho0.csv"});
    cfg["experiment"]["regimes"] = json!({"kind": "binary", "path": "out/maximizer_rho0.bin"});
    assert_eq!(code(&run(tmp.path(), "entropy", &cfg)), 0);
    assert_eq!(code(&run(tmp.path(), "regimes", &cfg)), 0);
    let e = read_json(tmp.path().join("again/entropy.json"));
    assert!(e["value"].as_f64().unwrap() >= 0.0);
    let r = read_json(tmp.path().join("again/regimes.json"));
    let total: f64 = r["regimes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x["measure"].as_f64().unwrap())
        .sum::<f64>()
        + r["leftover_measure"].as_f64().unwrap();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn exit_codes_distinguish_failures() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();

    let o = run(dir, "check", &json!({"system": sys2()}));
    assert_eq!(code(&o), 2, "missing output_dir");
    let o = run(
        dir,
        "verify",
        &json!({"system": sys2(), "output_dir": "out"}),
    );
    assert_eq!(code(&o), 2, "missing seed");
    let o = run(
        dir,
        "check",
        &json!({"system": sys2(), "p": 0.5, "output_dir": "out"}),
    );
    assert_eq!(code(&o), 2, "p < 1");
    let o = run_in(
        dir,
        "check",
        &json!({"system": sys2(), "output_dir": "out"}),
        &[("BECKNER_THREADS", "many")],
    );
    assert_eq!(code(&o), 2, "bad thread count");

    let big = json!({
        "system": sys2(),
        "grid": {"extents": [1.0, 1.0], "resolution": [100000, 100000]},
        "output_dir": "out",
        "experiment": {"blowup": {"steps": 2}}
    });
    assert_eq!(code(&run(dir, "blowup", &big)), 3);

    let bad = json!({"system": {"n": 2, "a": [[1, 2], [2, 1]], "m": [1, 1]}, "seed": 1, "output_dir": "out"});
    assert_eq!(code(&run(dir, "sigma", &bad)), 4);
    assert_eq!(code(&run(dir, "verify", &bad)), 4);

    let singular =
        json!({"system": {"n": 2, "a": [[1, 1], [1, 1]], "m": [1, 1]}, "output_dir": "out"});
    assert_eq!(code(&run(dir, "states", &singular)), 5);
}
