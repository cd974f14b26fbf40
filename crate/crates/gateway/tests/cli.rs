use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lapaware_core::tasks::ErrorKind;
use lapaware_gateway::report::Report;

fn lapaware(args: &[&str], log_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lapaware"));
    cmd.args(args).env("RUST_LOG", "warn");
    match log_dir {
        Some(d) => cmd.env("LAPAWARE_LOG_DIR", d),
        None => cmd.env_remove("LAPAWARE_LOG_DIR"),
    };
    cmd.output().unwrap()
}

fn read_report(path: &Path) -> Report {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn demo_air_cut_fails_with_cut_air() {
    let dir = tempfile::tempdir().unwrap();
    let out = lapaware(&["demo", "--scenario", "fig7-air", "--out", path(dir.path())], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_report(&dir.path().join("fig7-air.report.json"));
    assert!(!report.success);
    assert!(report.error_events.iter().any(|e| e.kind == ErrorKind::CutAir));
}

#[test]
fn demo_outputs_replay_and_score_to_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    for (scenario, scene, success) in [
        ("fig7-correct", "cholecystectomy", true),
        ("fig6-wrong-stomach", "suturing", false),
        ("suture-arc", "suturing", true),
    ] {
        // Output directory taken from the environment.
        let out = lapaware(&["demo", "--scenario", scenario], Some(dir.path()));
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let live = read_report(&dir.path().join(format!("{scenario}.report.json")));
        assert_eq!(live.success, success, "{scenario}");

        let log = dir.path().join(format!("{scenario}.ndjson"));
        let replayed = dir.path().join(format!("{scenario}.replay.json"));
        let out = lapaware(&["replay", "--scene", scene, "--log", path(&log), "--report", path(&replayed)], None);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(read_report(&replayed), live);

        let scored = dir.path().join(format!("{scenario}.score.json"));
        let out = lapaware(&["score", "--log", path(&log), "--report", path(&scored)], None);
        assert_eq!(out.status.code(), Some(0));
        assert_eq!(read_report(&scored), live);
    }
}

#[test]
fn truncated_log_fails_scoring() {
    let dir = tempfile::tempdir().unwrap();
    lapaware(&["demo", "--scenario", "fig7-correct", "--out", path(dir.path())], None);
    let log = dir.path().join("fig7-correct.ndjson");
    let text = fs::read_to_string(&log).unwrap();
    let cut: String = text.lines().take(40).map(|l| format!("{l}\n")).collect();
    fs::write(&log, cut).unwrap();
    let report = dir.path().join("r.json");
    let out = lapaware(&["score", "--log", path(&log), "--report", path(&report)], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("incomplete"));
    assert!(!report.exists());
}

#[test]
fn replay_on_the_wrong_scene_fails() {
    let dir = tempfile::tempdir().unwrap();
    lapaware(&["demo", "--scenario", "fig7-correct", "--out", path(dir.path())], None);
    let log = dir.path().join("fig7-correct.ndjson");
    let out = lapaware(&["replay", "--scene", "suturing", "--log", path(&log)], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("snapshot mismatch"));
}

#[test]
fn bad_arguments_exit_2() {
    for args in [
        &["demo", "--scenario", "fig9"][..],
        &["serve", "--scene", "cholecystectomy", "--task", "juggling", "--port", "0"],
        &["serve", "--scene", "cholecystectomy", "--task", "cutting"],
        &["serve", "--scene", "cholecystectomy", "--task", "cutting", "--port", "0", "--tick-rate", "0"],
        &["score", "--log", "x.ndjson"],
        &["frobnicate"],
    ] {
        assert_eq!(lapaware(args, None).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn missing_scene_file_is_a_runtime_failure() {
    let out = lapaware(&["replay", "--scene", "/nonexistent/scene.json", "--log", "/nonexistent/log"], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/scene.json"));
}

#[test]
fn headless_serve_records_to_the_log_dir() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["serve", "--scene", "cholecystectomy", "--task", "cutting", "--port", "0", "--max-ticks", "30"];
    let out = lapaware(&args, Some(dir.path()));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("listening on ws://127.0.0.1:"));
    let logs: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(logs.len(), 1);
    assert!(path(&logs[0]).ends_with(".ndjson"));

    let live: Report = serde_json::from_str(&stdout[stdout.find('{').unwrap()..]).unwrap();
    assert_eq!(live.ticks, 30);
    let replayed = dir.path().join("replay.json");
    let out =
        lapaware(&["replay", "--scene", "cholecystectomy", "--log", path(&logs[0]), "--report", path(&replayed)], None);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(read_report(&replayed), live);
}
