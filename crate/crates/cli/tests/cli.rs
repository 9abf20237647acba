use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn memsosc(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_memsosc"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn analyze_bundled_design1() {
    let dir = tempfile::tempdir().unwrap();
    let o = memsosc(&["analyze", "--design", "1"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert!(rel(v["f0_hz"].as_f64().unwrap(), 75.9e3) < 0.002);
    assert_eq!(v["feasible"], Value::Bool(true));
}

#[test]
fn analyze_config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"beam": {"length": 60e-6, "width": 1e-6}, "transducer": {"electrode_length": 45e-6}}"#,
    )
    .unwrap();
    let o = memsosc(
        &[
            "analyze",
            "--config",
            "cfg.json",
            "--set",
            "beam.q_factor=4500",
        ],
        dir.path(),
    );
    let v = stdout_json(&o);
    assert!(rel(v["f0_hz"].as_f64().unwrap(), 105.4e3) < 0.002);
    assert!(rel(v["r_x_ohm"].as_f64().unwrap(), 737.6e3) < 0.01);
}

#[test]
fn schema_error_exits_1_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"transducer": {"gap": -1}}"#).unwrap();
    let out = dir.path().join("out");
    for cmd in ["analyze", "simulate", "sweep"] {
        let o = memsosc(
            &[cmd, "--config", "bad.json", "--out", out.to_str().unwrap()],
            dir.path(),
        );
        assert_eq!(code(&o), 1);
        assert!(String::from_utf8_lossy(&o.stderr).contains("transducer.gap"));
        assert!(!out.exists());
    }
    let o = memsosc(&["analyze", "--config", "missing.json"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot read config"));
    fs::write(&cfg, r#"{"beam": {"legnth": 1}}"#).unwrap();
    let o = memsosc(&["analyze", "--config", "bad.json"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown field"));
}

#[test]
fn overbiased_design_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = memsosc(&["analyze", "--set", "transducer.bias=12"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("pull_in"));
}

#[test]
fn table1_passes_and_fails_with_wrong_density() {
    let dir = tempfile::tempdir().unwrap();
    let o = memsosc(&["table1", "--out", "t", "--format", "csv"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let csv = fs::read_to_string(dir.path().join("t/table1.csv")).unwrap();
    assert_eq!(csv.lines().count(), 28);
    let lx = csv
        .lines()
        .find(|l| l.starts_with("2,L_x,"))
        .expect("design 2 L_x row");
    assert!(lx.contains(",pass,"));
    let zd = csv
        .lines()
        .find(|l| l.starts_with("1,z-deflection,"))
        .unwrap();
    assert!(zd.contains("known discrepancy") && zd.contains(",pass,"));

    let o = memsosc(&["table1", "--rho", "5000"], dir.path());
    assert_eq!(code(&o), 2);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(
        text.lines()
            .filter(|l| l.contains(" f0 ") && l.contains("FAIL"))
            .count()
            >= 2
    );
}

#[test]
fn simulate_design1_oscillates_at_f0() {
    let dir = tempfile::tempdir().unwrap();
    let o = memsosc(&["simulate", "--design", "1", "--out", "s"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = dir.path().join("s");
    for f in ["trace.csv", "envelope.csv", "trace.svg", "summary.json"] {
        assert!(s.join(f).exists(), "{f}");
    }
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(s.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["summary"]["status"], "oscillating");
    let f = summary["summary"]["frequency"].as_f64().unwrap();
    assert!(rel(f, 75.9e3) < 0.01, "{f}");
    assert_eq!(summary["summary"]["pulled_in"], false);
    let header = fs::read_to_string(s.join("trace.csv")).unwrap();
    assert!(header.starts_with("t,v_in,v_out,x\n"));
}

#[test]
fn simulate_without_gain_decays() {
    let dir = tempfile::tempdir().unwrap();
    let o = memsosc(
        &[
            "simulate",
            "--gm",
            "0",
            "--set",
            "sim.cycles=500",
            "--out",
            "s",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["status"], "decayed");
    assert_eq!(v["frequency"], Value::Null);
}

#[test]
fn simulate_is_byte_identical_under_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| {
        vec![
            "simulate",
            "--seed",
            "7",
            "--set",
            "sim.cycles=300",
            "--out",
            out,
        ]
    };
    assert_eq!(code(&memsosc(&args("a"), dir.path())), 0);
    assert_eq!(code(&memsosc(&args("b"), dir.path())), 0);
    for f in ["trace.csv", "envelope.csv", "trace.svg", "summary.json"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
    let o = memsosc(
        &[
            "simulate",
            "--seed",
            "8",
            "--set",
            "sim.cycles=300",
            "--out",
            "c",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    assert_ne!(
        fs::read(dir.path().join("a/trace.csv")).unwrap(),
        fs::read(dir.path().join("c/trace.csv")).unwrap()
    );
}

#[test]
fn sweep_endpoints_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("spec.json"),
        r#"{"axes": [
            {"path": "beam.length", "min": 60e-6, "max": 100e-6, "steps": 2},
            {"path": "beam.width", "min": 1e-6, "max": 2e-6, "steps": 2}
        ], "objective": "max_f0"}"#,
    )
    .unwrap();
    let o = memsosc(
        &[
            "sweep",
            "--design",
            "2",
            "--spec",
            "spec.json",
            "--out",
            "w",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("w/sweep.json")).unwrap())
            .unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 4);
    let f0 = |i: usize| rows[i]["point"]["model"]["f0"].as_f64().unwrap();
    assert!(rel(f0(0), 105.4e3) < 0.002);
    assert!(rel(f0(3), 75.9e3) < 0.002);

    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("w/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(manifest["inputs_sha256"].as_str().unwrap().len(), 64);

    let again = memsosc(
        &[
            "sweep",
            "--design",
            "2",
            "--spec",
            "spec.json",
            "--out",
            "w2",
        ],
        dir.path(),
    );
    assert_eq!(code(&again), 0);
    for f in ["sweep.json", "manifest.json"] {
        assert_eq!(
            fs::read(dir.path().join("w").join(f)).unwrap(),
            fs::read(dir.path().join("w2").join(f)).unwrap()
        );
    }
}

#[test]
fn empty_spec_gives_single_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = memsosc(&["sweep", "--format", "csv"], dir.path());
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 2);
}

#[test]
fn refusals_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("big.json"),
        r#"{"axes": [
            {"path": "beam.length", "min": 60e-6, "max": 100e-6, "steps": 2000},
            {"path": "beam.width", "min": 1e-6, "max": 2e-6, "steps": 1000}
        ]}"#,
    )
    .unwrap();
    let o = memsosc(&["sweep", "--spec", "big.json"], dir.path());
    assert_eq!(code(&o), 2);

    fs::write(
        dir.path().join("c0.json"),
        r#"{"axes": [{"path": "pierce.c0", "min": 0.5e-9, "max": 1e-9, "steps": 5}]}"#,
    )
    .unwrap();
    let o = memsosc(&["optimize", "--spec", "c0.json"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("startup"));
}

#[test]
fn optimize_min_rx_hits_pull_in_bound() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("vp.json"),
        r#"{"axes": [{"path": "transducer.bias", "min": 1, "max": 12, "steps": 21}], "objective": "min_Rx"}"#,
    )
    .unwrap();
    let o = memsosc(&["optimize", "--spec", "vp.json", "--out", "o"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/optimize.json")).unwrap())
            .unwrap();
    let vp = v["params"][0][1].as_f64().unwrap();
    let bound = 0.97 * v["best"]["pull_in_voltage_v"].as_f64().unwrap();
    assert!(vp < bound && rel(vp, bound) < 1e-6, "{vp} vs {bound}");
    assert!(!v["log"].as_array().unwrap().is_empty());
    assert!(dir.path().join("o/manifest.json").exists());
}

#[test]
fn check_rules_reports_violations() {
    let dir = tempfile::tempdir().unwrap();
    let o = memsosc(&["check-rules"], dir.path());
    assert_eq!(code(&o), 0);
    let o = memsosc(
        &["check-rules", "--set", "transducer.gap=0.8e-6"],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
    let v = stdout_json(&o);
    assert_eq!(v["violations"][0]["rule"], "min_lateral_gap");
}
