use std::fs;
use std::process::{Command, Output};

fn snake(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_soft-snake"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn validate_passes() {
    let out = snake(&["validate"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 16);
    assert!(!text.contains("FAIL"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(snake(&["swim"]).status.code(), Some(2));
    assert_eq!(snake(&["sweep", "--grid", "0,tau"]).status.code(), Some(2));
    assert_eq!(snake(&["fly"]).status.code(), Some(2));
}

#[test]
fn bad_config_exits_1_and_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "[water]\ndrag_coeficient = 1.0\n").unwrap();
    let out = snake(&["drop", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("drag_coeficient"));
}

#[test]
fn dumped_config_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let out = snake(&["swim", "--dphi", "pi/3", "--dump-config"]);
    assert_eq!(out.status.code(), Some(0));
    let path = dir.path().join("c.toml");
    fs::write(&path, &out.stdout).unwrap();
    let again = snake(&["drop", "--config", path.to_str().unwrap(), "--dump-config"]);
    assert_eq!(again.stdout, out.stdout);
    assert!(String::from_utf8_lossy(&out.stdout).contains("inter_phase = 1.0471975511965976"));
}

#[test]
fn short_sweep_is_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("o");
    let out = snake(&["sweep", "--duration", "5", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out_dir.exists());
}

#[test]
fn short_swim_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = snake(&[
        "swim",
        "--dphi",
        "pi/8",
        "--duration",
        "0.5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["swim.csv", "swim_summary.json", "swim_path.svg", "swim_skin.svg", "swim_base_z.svg"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("swim_summary.json")).unwrap())
            .unwrap();
    assert!(summary["speed_mps"].is_null());
    let csv = fs::read_to_string(dir.path().join("swim.csv")).unwrap();
    // 0.5 s at 30 samples per second, both ends included.
    assert_eq!(csv.lines().count(), 1 + 16);
}
