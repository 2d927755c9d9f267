use std::path::Path;
use std::process::{Command, Output};

fn heatlab(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heatlab"))
        .args(args)
        .env("HEATLAB_OUT", out)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn list_experiments_names_every_id() {
    let dir = tempfile::tempdir().unwrap();
    let out = heatlab(dir.path(), &["list-experiments"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for id in ["kernel_accuracy", "estimates", "lemma1", "concentration", "theorem1", "counterexample", "acceptance_all"] {
        assert!(text.lines().any(|l| l.starts_with(id)), "missing {id}");
    }
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", r#"{"experiment": "kernel_accuracy", "t": "soon"}"#);
    assert_eq!(heatlab(dir.path(), &["run", &cfg]).status.code(), Some(2));
    let missing = dir.path().join("absent.json");
    assert_eq!(heatlab(dir.path(), &["run", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn wall_too_close_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "k.json",
        r#"{"experiment": "kernel_accuracy",
            "space": {"kind": "euclidean_radial", "n": 2, "extent": 10.0, "points": 500},
            "t": 16.0, "r_max": 4.0}"#,
    );
    assert_eq!(heatlab(dir.path(), &["run", &cfg]).status.code(), Some(3));
}

#[test]
fn leakage_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "leak.json",
        r#"{"experiment": "theorem1",
            "space": {"kind": "euclidean_radial", "n": 2, "extent": 30.0, "points": 600},
            "initial_data": {"kind": "bump", "shape": "triangle", "center": 0.0, "radius": 2.0, "mass": 1.0},
            "times": [25.0, 100.0]}"#,
    );
    let out = heatlab(dir.path(), &["run", &cfg]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("leakage"));
}

#[test]
fn run_writes_manifest_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "k.json",
        r#"{"experiment": "kernel_accuracy",
            "space": {"kind": "euclidean_radial", "n": 2, "extent": 40.0, "points": 4000},
            "t": 1.0, "r_max": 4.0, "seed": 5, "output_dir": "ka"}"#,
    );
    let out = heatlab(dir.path(), &["run", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run_dir = dir.path().join("ka");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["experiment"], "kernel_accuracy");
    assert_eq!(manifest["pass"], true);
    assert_eq!(manifest["config"]["seed"], 5);
    for f in manifest["files"].as_array().unwrap() {
        let name = f.as_str().unwrap();
        let text = std::fs::read_to_string(run_dir.join(name)).unwrap();
        if name.ends_with(".csv") {
            assert!(text.starts_with("# checks: "), "{name}");
            assert!(text.lines().next().unwrap().ends_with("seed: 5"), "{name}");
        }
    }
}

#[test]
fn failed_assertion_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "k.json",
        r#"{"experiment": "kernel_accuracy",
            "space": {"kind": "euclidean_radial", "n": 2, "extent": 40.0, "points": 400},
            "t": 1.0, "r_max": 4.0, "tolerance": 1e-9}"#,
    );
    let out = heatlab(dir.path(), &["run", &cfg]);
    assert_eq!(out.status.code(), Some(5));
    assert!(dir.path().join("kernel_accuracy/manifest.json").exists());
}
