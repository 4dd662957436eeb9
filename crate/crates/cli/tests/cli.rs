use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinrecon"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(cfg: &str, out: &Path) {
    let o = run(&["synth", "--config", s(&config(cfg)), "--out", s(out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

fn json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    synth("pb-smooth.toml", &a);
    synth("pb-smooth.toml", &b);
    for f in ["phantom.json", "trajectory.json", "measurements.bin", "manifest.json"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let leftovers: Vec<_> = std::fs::read_dir(&a)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().ends_with(".partial"))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn manifest_lists_three_hashed_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    synth("dt-smooth.toml", dir.path());
    let m = json(&dir.path().join("manifest.json"));
    let arts = m["artifacts"].as_array().unwrap();
    assert_eq!(arts.len(), 3);
    let names: Vec<&str> = arts.iter().map(|a| a["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["phantom", "trajectory", "measurements"]);
    for a in arts {
        let h = a["sha256"].as_str().unwrap();
        assert_eq!(h.len(), 64);
        let bytes = std::fs::read(dir.path().join(a["file"].as_str().unwrap())).unwrap();
        assert_eq!(spinrecon::forward::sha256_hex(&bytes), h);
    }
    // Frozen from a reference run: the generated phantom document.
    assert_eq!(
        arts[0]["sha256"],
        "8292a0e93b69c457313fb61ceb4ab0f0386e63e1ad31a483ebd561adb9d3e609"
    );
}

#[test]
fn seven_point_dt_config_is_not_admissible() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "synth",
        "--config",
        s(&config("dt-seven-points.toml")),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("too-few-points"));
    assert!(!dir.path().join("manifest.json").exists());
}

#[test]
fn schema_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("dt-smooth.toml")).unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, text.replace("seed = 7", "seed = \"seven\"")).unwrap();
    let o = run(&["synth", "--config", s(&bad), "--out", s(dir.path())]);
    assert_eq!(code(&o), 2);
    assert!(
        String::from_utf8_lossy(&o.stderr).contains("line 4"),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn recover_dt_example_and_rebuild_report() {
    let dir = tempfile::tempdir().unwrap();
    synth("dt-smooth.toml", dir.path());
    let o = run(&[
        "recover",
        "--config",
        s(&config("dt-smooth.toml")),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(&dir.path().join("summary.json"));
    assert!(summary["summary"]["max_omega_error"].as_f64().unwrap() <= 1e-6);
    let csv = std::fs::read_to_string(dir.path().join("steps.csv")).unwrap();
    assert!(csv.starts_with("step,t,omega_hat_x"));
    assert_eq!(csv.lines().count(), 102);
    assert!(dir.path().join("phi_profile.csv").exists());

    let again = dir.path().join("again");
    let o = run(&[
        "report",
        "--result",
        s(&dir.path().join("result.json")),
        "--out",
        s(&again),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&again.join("summary.json")), summary);
    assert_eq!(std::fs::read_to_string(again.join("steps.csv")).unwrap(), csv);
}

#[test]
fn degenerate_motion_exits_flagged() {
    let dir = tempfile::tempdir().unwrap();
    synth("pb-degenerate.toml", dir.path());
    let o = run(&[
        "recover",
        "--config",
        s(&config("pb-degenerate.toml")),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), 10);
    let r = json(&dir.path().join("result.json"));
    assert!(!r["result"]["flagged"].as_array().unwrap().is_empty());
    assert!(r["result"]["trajectory"].is_null());
}

#[test]
fn corrupted_payload_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    synth("pb-smooth.toml", dir.path());
    let p = dir.path().join("measurements.bin");
    let mut bytes = std::fs::read(&p).unwrap();
    let n = bytes.len();
    bytes[n - 5] ^= 0x40;
    std::fs::write(&p, bytes).unwrap();
    let o = run(&[
        "recover",
        "--config",
        s(&config("pb-smooth.toml")),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn header_config_mismatch_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    synth("pb-smooth.toml", dir.path());
    let o = run(&[
        "recover",
        "--config",
        s(&config("dt-smooth.toml")),
        "--measurements",
        s(&dir.path().join("measurements.bin")),
        "--out",
        s(&dir.path().join("r")),
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("mismatch"));
}

#[test]
fn verify_kinematics_includes_nondegeneracy_identity() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify", "kinematics", "--out", s(dir.path())]);
    assert_eq!(code(&o), 0);
    let r = json(&dir.path().join("verify.json"));
    assert_eq!(r["passed"], true);
    let names: Vec<&str> = r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(names.contains(&"kinematics.nondegeneracy-identity"));
}

#[test]
fn injected_height_sign_fails_forward_suite_by_name() {
    let o = run(&["verify", "forward", "--inject-fault", "flip-h"]);
    assert_eq!(code(&o), 1);
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let failed: Vec<&str> = r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(failed, ["forward.dt-ewald-sphere"]);
}

#[test]
fn sampled_backend_recovers_dt() {
    let dir = tempfile::tempdir().unwrap();
    synth("dt-smooth.toml", dir.path());
    let o = run(&[
        "--threads",
        "2",
        "recover",
        "--config",
        s(&config("dt-smooth.toml")),
        "--out",
        s(dir.path()),
        "--backend",
        "fd",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(&dir.path().join("summary.json"));
    assert!(summary["summary"]["max_omega_error"].as_f64().unwrap() <= 1e-3);
}
