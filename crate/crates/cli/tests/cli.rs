use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn xspec(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xspec"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).expect("valid JSON")
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["--help"][..], &["--version"], &["ltg", "--help"]] {
        let out = xspec(args, dir.path());
        assert_eq!(out.status.code(), Some(0), "{args:?}");
        assert!(!out.stdout.is_empty());
    }
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(xspec(&["synth", "--bogus"], p).status.code(), Some(1));
    assert_eq!(xspec(&["nonsense"], p).status.code(), Some(1));
    assert_eq!(xspec(&["synth"], p).status.code(), Some(1), "missing --out");
    assert_eq!(xspec(&["descent", "--objective", "nope"], p).status.code(), Some(1));
    assert_eq!(xspec(&["descent", "--lr", "0"], p).status.code(), Some(1));
    assert_eq!(xspec(&["attn"], p).status.code(), Some(1), "needs --demo");
    assert_eq!(xspec(&["attn", "--demo", "--height", "10"], p).status.code(), Some(1));
    fs::create_dir(p.join("in")).unwrap();
    assert_eq!(
        xspec(&["ltg", "--in", "in", "--out", "o", "--p", "1.5"], p).status.code(),
        Some(1)
    );
}

#[test]
fn missing_input_exits_two_and_names_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = xspec(&["ltg", "--in", "no-such-dir", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no-such-dir"));

    fs::create_dir(dir.path().join("empty")).unwrap();
    let out = xspec(&["discrepancy", "--in", "empty"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_fills_in_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("d.conf"), "# descent settings\nsteps = 7\nper_modality = 2\nlr=0.05\n").unwrap();
    let out = xspec(&["descent", "--config", "d.conf", "--lr", "0.2", "--report", "r.json", "--out", "d.csv"], p);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&fs::read(p.join("r.json")).unwrap());
    assert_eq!(r["config"]["steps"], 7);
    assert_eq!(r["config"]["per-modality"], 2);
    assert_eq!(r["config"]["lr"], 0.2);
    assert_eq!(r["config"]["objective"], "cross-center");
    assert!(r["config"].get("out").is_none());
    let csv = fs::read_to_string(p.join("d.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 8);
    assert!(csv.starts_with("step,objective,cross_center,modality_gap\n"));

    fs::write(p.join("bad.conf"), "stepz = 7\n").unwrap();
    let out = xspec(&["descent", "--config", "bad.conf"], p);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stepz"));
}

#[test]
fn synth_then_ratio_map_reports_constant_ratios() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let out = xspec(&["synth", "--out", "s", "--seed", "3", "--width", "20", "--height", "30", "--materials", "3"], p);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let scene = json(&fs::read(p.join("s/scene.json")).unwrap());
    assert_eq!(scene["command"], "synth");
    assert_eq!(scene["tool"], "xspec");

    let out = xspec(
        &["ratio-map", "--num", "s/N.png", "--den", "s/G.png", "--materials", "s/materials.png", "--out", "r.csv"],
        p,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = json(&out.stdout);
    let csv = fs::read_to_string(p.join("r.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 20 * 30);
    assert_eq!(rep["result"]["valid"].as_u64().unwrap() + rep["result"]["masked"].as_u64().unwrap(), 600);
    for m in rep["result"]["materials"].as_array().unwrap() {
        // 8-bit PNG quantization limits constancy to roughly 1/255 relative.
        assert!(m["cv"].as_f64().unwrap() < 0.05);
    }
}

#[test]
fn ltg_writes_images_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(xspec(&["synth", "--out", "in", "--width", "16", "--height", "24"], p).status.success());
    fs::remove_file(p.join("in/materials.png")).unwrap();
    let out = xspec(&["ltg", "--in", "in", "--out", "o", "--p", "1", "--gen", "constant:0.5", "--trace", "t.jsonl"], p);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = json(&out.stdout);
    assert_eq!(rep["result"]["images"], 4);
    assert_eq!(rep["result"]["applied"], 4);
    assert_eq!(rep["config"]["gen"], "constant:0.5");
    for s in ["R", "G", "B", "N"] {
        assert!(p.join(format!("o/{s}.png")).is_file());
    }
    let trace = fs::read_to_string(p.join("t.jsonl")).unwrap();
    let lines: Vec<Value> = trace.lines().map(|l| json(l.as_bytes())).collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0]["file"], "B.png");
}

#[test]
fn eval_scores_feature_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("q.csv"), "id,modality,f0\n0,VIS,0.0\n").unwrap();
    fs::write(p.join("g.csv"), "id,modality,f0\n0,NIR,1.0\n1,NIR,2.0\n0,NIR,3.0\n").unwrap();
    let out = xspec(&["eval", "--query", "q.csv", "--gallery", "g.csv", "--ranks", "1,2"], p);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&out.stdout);
    assert_eq!(r["result"]["cmc"]["1"], 1.0);
    assert_eq!(r["result"]["map"], (1.0 + 2.0 / 3.0) / 2.0);

    let out = xspec(&["eval", "--query", "q.csv", "--gallery", "g.csv"], p);
    assert_eq!(out.status.code(), Some(2), "rank 20 exceeds a gallery of 3");

    fs::write(p.join("q2.csv"), "id,modality,f0\n7,VIS,0.0\n").unwrap();
    let out = xspec(&["eval", "--query", "q2.csv", "--gallery", "g.csv", "--ranks", "1"], p);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains('7'));
}

#[test]
fn reports_are_byte_identical_for_equal_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let runs: Vec<Vec<u8>> = (0..2)
        .map(|_| xspec(&["discrepancy", "--seed", "11", "--images", "20"], p).stdout)
        .collect();
    assert!(!runs[0].is_empty());
    assert_eq!(runs[0], runs[1]);
    let other = xspec(&["discrepancy", "--seed", "12", "--images", "20"], p).stdout;
    assert_ne!(runs[0], other);
}

#[test]
fn failing_write_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("blocker"), "").unwrap();
    let out = xspec(&["attn", "--demo", "--out", "blocker/a.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
