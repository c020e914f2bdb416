use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vagus-mc")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn validate_accepts_shipped_configs() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["sweep.json", "endpoints.json", "quick.json"] {
        let out = bin(&["validate", "--config", root.join(name).to_str().unwrap()]);
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn invalid_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        r#"{"trials_per_median": 0}"#,
        r#"{"k1_medians": [2.0, -1.0]}"#,
        r#"{"unknown_key": 1}"#,
        r#"{"params": {"synapse": {"p_release": 1.5}}}"#,
        "not json",
    ];
    for (i, body) in cases.iter().enumerate() {
        let cfg = write(dir.path(), &format!("c{i}.json"), body);
        for cmd in ["validate", "sweep"] {
            let out = bin(&[cmd, "--config", &cfg]);
            assert_eq!(out.status.code(), Some(2), "{cmd} {body}");
        }
    }
    let out = bin(&["validate", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_then_recompute_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "cfg.json",
        r#"{"k1_medians": [3.1], "trial_template": {"t_end_s": 12.0}}"#,
    );
    let out_dir = dir.path().join("run");
    let out = bin(&[
        "simulate", "--config", &cfg, "--seed", "5", "--trials", "2", "--out", out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["summary.json", "summary.csv", "metrics.json", "manifest.json"] {
        assert!(out_dir.join(f).is_file(), "{f}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["master_seed"], 5);
    assert_eq!(summary["rows"][0]["trials"], 2);

    let out = bin(&["metrics", "--run-dir", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 2);

    let empty = tempfile::tempdir().unwrap();
    let out = bin(&["metrics", "--run-dir", empty.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_failure_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let body = format!(
        r#"{{"k1_medians": [2.0], "trials_per_median": 2, "output_dir": {:?},
            "trial_template": {{"t_end_s": 1.0}},
            "params": {{"hh": {{"i_ext_ua_per_cm2": 1e6}}}}}}"#,
        out_dir.to_str().unwrap()
    );
    let cfg = write(dir.path(), "cfg.json", &body);
    let out = bin(&["sweep", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
