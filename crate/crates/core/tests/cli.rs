use std::path::Path;
use std::process::{Command, Output};

fn lh3d(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lh3d"))
        .args(args)
        .current_dir(dir)
        .env_remove("LH3D_SEED")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

fn small_pool(dir: &Path, scenes: &str) {
    let out = lh3d(dir, &["gen-pool", "--scenes", scenes, "--seed", "3", "--objects-max", "12", "--out", "pool.jsonl"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn gen_pool_writes_header_plus_scenes() {
    let dir = tempfile::tempdir().unwrap();
    small_pool(dir.path(), "40");
    let text = std::fs::read_to_string(dir.path().join("pool.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 41);
    assert!(text.starts_with("{\"format\":\"lh3d-pool/1\""));
    assert_eq!(code(&lh3d(dir.path(), &["gen-pool", "--scenes", "0", "--out", "x.jsonl"])), 2);
}

#[test]
fn select_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_pool(d, "5");
    let out = lh3d(d, &["select", "--pool", "pool.jsonl", "--strategy", "entropy", "--k", "10", "--out", "r.json"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("clamping to 5"));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(r["format"], "lh3d-round/1");
    assert_eq!(r["selected"].as_array().unwrap().len(), 5);

    let out = lh3d(d, &["select", "--pool", "pool.jsonl", "--object-budget", "0", "--out", "e.json"]);
    assert_eq!(code(&out), 3);

    let text = std::fs::read_to_string(d.join("pool.jsonl")).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[3] = "{\"scene_id\": oops}";
    std::fs::write(d.join("bad.jsonl"), lines.join("\n")).unwrap();
    let out = lh3d(d, &["select", "--pool", "bad.jsonl"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));

    assert_eq!(code(&lh3d(d, &["select", "--pool", "missing.jsonl"])), 1);
}

#[test]
fn select_runs_three_stages_in_requested_order() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_pool(d, "60");
    let out = lh3d(d, &["select", "--pool", "pool.jsonl", "--k", "5", "--stage-order", "gv,dc,sb", "--out", "r.json"]);
    assert_eq!(code(&out), 0);
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    let stages: Vec<&str> = r["stage_outputs"].as_array().unwrap().iter().map(|s| s["stage"].as_str().unwrap()).collect();
    assert_eq!(stages, ["gv", "dc", "sb"]);
    assert_eq!(r["strategy"], "lh3d[gv,dc,sb]");
}

#[test]
fn print_config_round_trips_through_config() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = lh3d(d, &["simulate", "--scenes", "80", "--k", "7", "--strategies", "lh3d,random", "--print-config"]);
    assert_eq!(code(&out), 0);
    std::fs::write(d.join("run.json"), &out.stdout).unwrap();
    let again = lh3d(d, &["simulate", "--config", "run.json", "--print-config"]);
    assert_eq!(again.stdout, out.stdout);
    std::fs::write(d.join("bad.json"), "{\"rounds\": 2, \"bogus\": true}").unwrap();
    assert_eq!(code(&lh3d(d, &["simulate", "--config", "bad.json"])), 2);
}

#[test]
fn simulate_zero_budget_halts_immediately() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = lh3d(
        d,
        &["simulate", "--scenes", "60", "--init-labeled", "5", "--k", "5", "--object-budget", "0", "--history", "h.jsonl", "--report", "r.csv"],
    );
    assert_eq!(code(&out), 0);
    let history = std::fs::read_to_string(d.join("h.jsonl")).unwrap();
    assert_eq!(history.lines().count(), 2);
    assert!(history.lines().nth(1).unwrap().contains("\"exhausted\":true"));
    let rebuilt = lh3d(d, &["report", "--history", "h.jsonl", "--out", "r2.csv"]);
    assert_eq!(code(&rebuilt), 0);
    assert_eq!(std::fs::read(d.join("r.csv")).unwrap(), std::fs::read(d.join("r2.csv")).unwrap());
}

#[test]
fn check_command_and_negative_control() {
    let dir = tempfile::tempdir().unwrap();
    let ok = lh3d(dir.path(), &["check", "--trials", "2000", "--seed", "1"]);
    assert_eq!(code(&ok), 0);
    let again = lh3d(dir.path(), &["check", "--trials", "2000", "--seed", "1"]);
    assert_eq!(ok.stdout, again.stdout);
    let broken = lh3d(dir.path(), &["check", "--trials", "2000", "--inject-broken-transform"]);
    assert_eq!(code(&broken), 4);
    let text = String::from_utf8_lossy(&broken.stdout);
    assert!(text.lines().any(|l| l.starts_with("FAIL submodularity")));
}
