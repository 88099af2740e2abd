//! End-to-end runs of the binary: schema pinning, reproducibility, exit codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_landscape-lab"))
}

fn sigma_z() -> Value {
    json!({"dim": 2, "re": [[1, 0], [0, -1]], "im": [[0, 0], [0, 0]]})
}

fn run(dir: &Path, command: &str, config: &Value, threads: Option<&str>) -> Output {
    let path = dir.join(format!("{command}.config.json"));
    fs::write(&path, config.to_string()).unwrap();
    let mut cmd = bin();
    cmd.arg(command)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir)
        .arg("--quiet");
    match threads {
        Some(t) => cmd.env("LANDSCAPE_LAB_THREADS", t),
        None => cmd.env_remove("LANDSCAPE_LAB_THREADS"),
    };
    cmd.output().unwrap()
}

fn report(dir: &Path, command: &str, seed: u64) -> Value {
    let text = fs::read_to_string(dir.join(format!("{command}-{seed}.report.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn small_configs() -> Vec<(&'static str, Value)> {
    let quantum_one = json!({"regime": "quantum", "kind": "typeOne", "observable": sigma_z()});
    vec![
        (
            "oracle",
            json!({"seed": 0, "spec": {"regime": "classical", "kind": "typeOne", "observable": {"values": [1, 2, 3, 4]}}}),
        ),
        (
            "optimize",
            json!({"seed": 1, "spec": quantum_one, "run": {"nStarts": 3, "classify": true}, "output": {"csv": true, "trajectoryStride": 5}}),
        ),
        (
            "probe-concavity",
            json!({"seed": 2, "spec": {"regime": "quantum", "kind": "typeTwo", "temperature": 0.7, "observable": sigma_z()}, "probe": {"samples": 50}}),
        ),
        (
            "level-set",
            json!({"seed": 3, "spec": quantum_one, "levelSet": {"pairs": 3, "steps": 5}}),
        ),
        (
            "rank-check",
            json!({"seed": 4, "map": {"kind": "kinematic", "dim": 2, "rank": 2}, "rankCheck": {"points": 3}}),
        ),
        ("false-trap", json!({"seed": 5, "fixture": {"nStarts": 2}})),
        (
            "real-trap",
            json!({"seed": 6, "fixture": {"nStarts": 2, "rankPoints": 2}}),
        ),
    ]
}

/// Field names and value kinds, with arrays collapsed to their first element.
fn skeleton(v: &Value) -> Value {
    match v {
        Value::Object(m) => {
            Value::Object(m.iter().map(|(k, x)| (k.clone(), skeleton(x))).collect())
        }
        Value::Array(a) => Value::Array(a.first().map(skeleton).into_iter().collect()),
        Value::Number(_) => json!("number"),
        Value::String(_) => json!("string"),
        Value::Bool(_) => json!("bool"),
        Value::Null => json!("null"),
    }
}

fn golden_path(command: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(format!("{command}.schema.json"))
}

#[test]
fn report_schemas_match_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    for (command, config) in small_configs() {
        let out = run(dir.path(), command, &config, Some("2"));
        assert!(
            out.status.success(),
            "{command}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let seed = config["seed"].as_u64().unwrap();
        let shape = skeleton(&report(dir.path(), command, seed));
        assert_eq!(shape["schemaVersion"], "number");
        let path = golden_path(command);
        if update {
            fs::write(&path, serde_json::to_string_pretty(&shape).unwrap() + "\n").unwrap();
            continue;
        }
        let golden: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(
            shape, golden,
            "{command} report schema drifted; rerun with UPDATE_GOLDEN=1 if intended"
        );
    }
}

#[test]
fn identical_configs_give_identical_payloads_at_any_thread_count() {
    let config = json!({
        "seed": 11,
        "spec": {"regime": "quantum", "kind": "typeTwo", "temperature": 0.5, "observable": sigma_z()},
        "map": {"kind": "kinematic", "rank": 2, "initialState": "random"},
        "run": {"nStarts": 12},
        "output": {"csv": true}
    });
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(run(a.path(), "optimize", &config, Some("1"))
        .status
        .success());
    assert!(run(b.path(), "optimize", &config, Some("4"))
        .status
        .success());
    let (ra, rb) = (
        report(a.path(), "optimize", 11),
        report(b.path(), "optimize", 11),
    );
    for section in [
        "schemaVersion",
        "command",
        "libraryVersion",
        "seed",
        "payload",
    ] {
        assert_eq!(
            serde_json::to_string(&ra[section]).unwrap(),
            serde_json::to_string(&rb[section]).unwrap(),
            "{section} differs"
        );
    }
    assert_eq!(ra["metadata"]["threads"], 1);
    assert_eq!(rb["metadata"]["threads"], 4);
    let csv = |d: &Path| fs::read(d.join("optimize-11.trajectories.csv")).unwrap();
    assert_eq!(csv(a.path()), csv(b.path()));
}

#[test]
fn sigma_z_optimize_is_trap_free() {
    let dir = tempfile::tempdir().unwrap();
    let config = json!({"seed": 0, "spec": {"regime": "quantum", "kind": "typeOne", "observable": sigma_z()}});
    let out = run(dir.path(), "optimize", &config, None);
    assert!(out.status.success());
    let r = report(dir.path(), "optimize", 0);
    let verdict = &r["payload"]["verdict"];
    assert_eq!(verdict["trapFree"], true);
    assert_eq!(verdict["nRuns"], 100);
    assert!(verdict["worstGap"].as_f64().unwrap() <= 1e-5);
    assert_eq!(r["config"]["run"]["ascent"]["maxIterations"], 2000);
}

#[test]
fn false_trap_report_shows_both_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), "false-trap", &json!({"seed": 6}), None);
    assert!(out.status.success());
    let p = &report(dir.path(), "false-trap", 6)["payload"];
    assert_eq!(
        p["trapStart"]["criticalPoint"]["classification"],
        "trapCandidate"
    );
    assert_eq!(p["constrainedVerdict"]["trapFree"], false);
    assert_eq!(p["unconstrainedVerdict"]["trapFree"], true);
}

#[test]
fn missing_temperature_exits_with_status_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = json!({"seed": 0, "spec": {"regime": "quantum", "kind": "typeTwo", "observable": sigma_z()}});
    let out = run(dir.path(), "optimize", &config, None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("spec.temperature"));
    assert!(!dir.path().join("optimize-0.report.json").exists());
}

#[test]
fn all_config_errors_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let config = json!({"spec": {"regime": "quantum", "kind": "typeTwo", "temperature": -2, "observable": sigma_z()}, "run": {"nStarts": 0}});
    let out = run(dir.path(), "optimize", &config, None);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for path in ["seed", "spec.temperature", "run.nStarts"] {
        assert!(
            err.contains(&format!("{path}:")),
            "{path} missing from {err}"
        );
    }
}

#[test]
fn runtime_failures_exit_with_status_three() {
    let dir = tempfile::tempdir().unwrap();
    let config = json!({
        "seed": 0,
        "spec": {"regime": "quantum", "kind": "typeOne", "observable": sigma_z()},
        "levelSet": {"endpoints": [
            {"dim": 2, "re": [[1, 0], [0, 0]], "im": [[0, 0], [0, 0]]},
            {"dim": 2, "re": [[0, 0], [0, 1]], "im": [[0, 0], [0, 0]]}
        ]}
    });
    let out = run(dir.path(), "level-set", &config, None);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("same level"));
}

#[test]
fn seed_flag_overrides_and_names_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    fs::write(&path, json!({"seed": 1, "spec": {"regime": "quantum", "kind": "typeOne", "observable": sigma_z()}}).to_string())
        .unwrap();
    let out = bin()
        .args(["oracle", "--seed", "42", "--quiet", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert_eq!(report(dir.path(), "oracle", 42)["seed"], 42);
}

#[test]
fn bad_thread_cap_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        "oracle",
        &json!({"seed": 0, "spec": {"regime": "quantum", "kind": "typeOne", "observable": sigma_z()}}),
        Some("many"),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let v: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        let command = v["command"].as_str().unwrap();
        if matches!(command, "oracle" | "level-set" | "rank-check") {
            let out = tempfile::tempdir().unwrap();
            let status = bin()
                .arg(command)
                .arg("--config")
                .arg(&path)
                .arg("--out")
                .arg(out.path())
                .arg("--quiet")
                .status()
                .unwrap();
            assert!(status.success(), "{}", path.display());
        }
        seen += 1;
    }
    assert!(seen >= 7);
}
