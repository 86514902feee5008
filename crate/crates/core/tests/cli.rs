//! End-to-end runs of the binary: artifacts, determinism and exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_growthwave"));
    c.env_remove("GROWTHWAVE_OUT");
    c
}

fn run(dir: &Path, args: &[&str], config: &str) -> Output {
    let cfg = dir.join("config.json");
    fs::write(&cfg, config).unwrap();
    bin()
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn plan_for_power_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["plan"], r#"{"weight":{"family":"power","a":1},"A":2,"J":10}"#);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let plan = read_json(&dir.path().join("out/plan.json"));
    assert_eq!(plan["schema_version"], "growthwave/1");
    assert_eq!(plan["config"]["J"], 10);
    let alphas: Vec<u64> = serde_json::from_value(plan["report"]["plan"]["alphas"].clone()).unwrap();
    assert_eq!(alphas, (0..=12).collect::<Vec<_>>());
    assert_eq!(plan["report"]["plan"]["m"], 2);
}

#[test]
fn constant_characterization() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &["characterize"],
        r#"{"weight":{"family":"power","a":1},"J":10,"boundary":"constant"}"#,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = read_json(&dir.path().join("out/characterize.json"));
    assert!((rep["report"]["K_direct"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((rep["report"]["equivalence_ratio"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    let profile = fs::read_to_string(dir.path().join("out/profile.csv")).unwrap();
    assert!(profile.lines().count() > 2);
}

#[test]
fn reruns_are_byte_identical() {
    let config = r#"{"weight":{"family":"power","a":1},"J":9,"seed":3,"trials":4}"#;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for cmd in ["synth", "osc", "seq"] {
        assert!(run(a.path(), &[cmd], config).status.success(), "{cmd}");
        assert!(run(b.path(), &[cmd], config).status.success(), "{cmd}");
    }
    let mut names: Vec<_> = fs::read_dir(a.path().join("out"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() == 7);
    for n in names {
        let x = fs::read(a.path().join("out").join(&n)).unwrap();
        let y = fs::read(b.path().join("out").join(&n)).unwrap();
        assert_eq!(x, y, "{n:?} differs");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["synth", "--seed", "11"], r#"{"weight":{"family":"power","a":1},"J":8,"seed":3}"#);
    assert!(out.status.success());
    let rep = read_json(&dir.path().join("out/synth.json"));
    assert_eq!(rep["effective"]["seed"], 11);
    assert_eq!(rep["config"]["seed"], 3);
}

#[test]
fn failures_give_one_line_and_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&[&str], &str); 4] = [
        (&["bogus"], r#"{"weight":{"family":"power","a":1},"J":10}"#),
        (&["plan"], r#"{"weight":{"family":"power","a":1},"J":30}"#),
        (&["osc"], r#"{"weight":{"family":"power","a":1},"J":10}"#),
        (&["plan"], r#"{"weight":{"family":"power","a":1},"J":10,"colour":1}"#),
    ];
    for (args, config) in cases {
        let out = run(dir.path(), args, config);
        assert_eq!(out.status.code(), Some(1), "{args:?} {config}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.lines().count(), 1, "{err}");
        assert!(err.starts_with("growthwave: error kind="), "{err}");
    }
}

#[test]
fn converse_refusal_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &["synth"],
        r#"{"weight":{"family":"power","a":1},"J":10,"boundary":"counterexample"}"#,
    );
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("kind=not_power_type"), "{err}");
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    fs::write(&cfg, r#"{"weight":{"family":"logpow","b":1},"J":8}"#).unwrap();
    let target = dir.path().join("env-out");
    let out = bin()
        .args(["plan", "--config"])
        .arg(&cfg)
        .env("GROWTHWAVE_OUT", &target)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(target.join("plan.json").exists());
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["selftest"], r#"{"weight":{"family":"power","a":1},"J":10,"seed":1}"#);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = read_json(&dir.path().join("out/selftest.json"));
    assert_eq!(rep["report"]["failed"], 0);
}
