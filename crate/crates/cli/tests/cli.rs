use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nilwalk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nilwalk"))
        .args(args)
        .env_remove("NILWALK_THREADS")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn small_walk(dir: &Path) -> Output {
    let out = dir.to_str().unwrap();
    nilwalk(&["walk", "--preset", "heisenberg-srw", "--n", "64", "--reps", "20", "--seed", "1", "--out", out])
}

#[test]
fn walk_writes_manifest_and_replays() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    assert_eq!(code(&small_walk(&a)), 0);
    for f in ["walk.csv", "layers.csv", "manifest.json"] {
        assert!(a.join(f).is_file(), "{f} missing");
    }
    let b = tmp.path().join("b");
    let r = nilwalk(&["replay", a.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    assert!(String::from_utf8_lossy(&r.stdout).contains("replay matches"));
    for f in ["walk.csv", "layers.csv", "manifest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn tampered_manifest_fails_replay() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&small_walk(tmp.path())), 0);
    let m = tmp.path().join("manifest.json");
    let text = fs::read_to_string(&m).unwrap();
    let (head, tail) = text.split_once("\"sha256\": \"").unwrap();
    let flipped = if tail.starts_with('0') { "1" } else { "0" };
    fs::write(&m, format!("{head}\"sha256\": \"{flipped}{}", &tail[1..])).unwrap();
    let r = nilwalk(&["replay", m.to_str().unwrap()]);
    assert_eq!(code(&r), 4);
    assert!(String::from_utf8_lossy(&r.stderr).contains("replay differs"));
}

#[test]
fn run_config_matches_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    assert_eq!(code(&small_walk(&a)), 0);
    let cfg = tmp.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"schema_version": 1, "kind": "walk", "preset": "heisenberg-srw", "n": 64, "reps": 20, "seed": 1}"#,
    )
    .unwrap();
    let b = tmp.path().join("b");
    let r = nilwalk(&["run", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(fs::read(a.join("walk.csv")).unwrap(), fs::read(b.join("walk.csv")).unwrap());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let unknown = nilwalk(&["walk", "--preset", "nope", "--n", "4", "--reps", "1", "--out", out]);
    assert_eq!(code(&unknown), 2);
    let ceiling = nilwalk(&[
        "walk", "--preset", "heisenberg-srw", "--n", "1000", "--reps", "1000", "--max-steps", "10", "--out", out,
    ]);
    assert_eq!(code(&ceiling), 3);
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"schema_version": 9, "kind": "walk"}"#).unwrap();
    assert_eq!(code(&nilwalk(&["run", "--config", bad.to_str().unwrap()])), 2);
    let missing = tmp.path().join("missing.json");
    assert_eq!(code(&nilwalk(&["run", "--config", missing.to_str().unwrap()])), 5);
    assert_eq!(code(&nilwalk(&["walk", "--n", "x"])), 2);
}

#[test]
fn invalid_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_nilwalk"))
        .args(["walk", "--preset", "heisenberg-srw", "--n", "8", "--reps", "2", "--out"])
        .arg(tmp.path())
        .env("NILWALK_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn algebra_check_and_split_scan() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("alg");
    let r = nilwalk(&["algebra-check", "--preset", "heisenberg", "--out", a.to_str().unwrap()]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(a.join("algebra_report.json")).unwrap()).unwrap();
    assert!(report.is_object());

    let s = tmp.path().join("scan");
    let r = nilwalk(&["split-scan", "--preset", "d4-r2", "--reps", "200", "--seed", "2", "--out", s.to_str().unwrap()]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let csv = fs::read_to_string(s.join("scan.csv")).unwrap();
    assert!(csv.contains("replicate,delta_raw,Delta,ratio"));
    assert!(s.join("scan.json").is_file());
}
