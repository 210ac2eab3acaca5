use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/three_scenes")
}

fn scenefuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scenefuse")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn segment_prints_partition() {
    let v = json(&scenefuse(&["segment", "--episode", path(&fixture())]));
    assert_eq!(v["breaks"], serde_json::json!([6, 12]));
    assert_eq!(v["scenes"][1]["roster"], serde_json::json!(["Nick", "Ridge"]));
    assert!(v["total_cost_bits"].as_f64().unwrap() > 0.0);
}

#[test]
fn segment_in_token_chunks() {
    let v = json(&scenefuse(&["segment", "--episode", path(&fixture()), "--chunk-tokens", "40"]));
    assert!(v["breaks"].as_array().unwrap().len() >= 3);
}

#[test]
fn reorder_groups_casts() {
    let v = json(&scenefuse(&["reorder", "--episode", path(&fixture())]));
    assert_eq!(v["permutation"], serde_json::json!([1, 0, 2]));
    assert_eq!(v["reordered_cost"], 1.0);
}

#[test]
fn align_reports_spans() {
    let v = json(&scenefuse(&["align", "--episode", path(&fixture())]));
    assert_eq!(v["spans"][0], serde_json::json!({"start_ms": 1000, "end_ms": 18500}));
    assert_eq!(v["alignment"]["total_cost"], 0.0);
}

#[test]
fn captions_clean_from_stdin() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_scenefuse"))
        .args(["captions", "clean", "--speakers", "Brody,Jessica"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"a man is talking to another man\na man is kissing a woman\na dog is seen running\n")
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "Brody is kissing Jessica\na dog is running\n");
}

#[test]
fn captions_clean_for_episode() {
    let v = json(&scenefuse(&["captions", "clean", "--episode", path(&fixture())]));
    assert_eq!(v[2]["sentences"][0], "Brody is kissing Jessica");
}

#[test]
fn summarize_then_evaluate_with_mocks() {
    let out = tempfile::tempdir().unwrap();
    let run = scenefuse(&["summarize", "--mock", "--episode", path(&fixture()), "--out", path(out.path())]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let dir = out.path().join("three_scenes");
    for f in ["partition.json", "summary.txt", "fusion_input.txt", "prefs.json", "manifest.json"] {
        assert!(dir.join(f).is_file(), "{f}");
    }
    let summary = std::fs::read_to_string(dir.join("summary.txt")).unwrap();
    assert_eq!(String::from_utf8(run.stdout).unwrap(), summary);

    let gold = fixture().join("gold/1.txt");
    let v = json(&scenefuse(&[
        "evaluate",
        "--mock",
        "--episode",
        path(&fixture()),
        "--out",
        path(out.path()),
        "--summary",
        path(&gold),
    ]));
    assert_eq!(v["prefs"], 100.0);
}

#[test]
fn config_file_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        format!(
            "context_budget = 4000\nevaluate = false\n[flags]\nskip_vision = true\n[paths]\nepisode = {:?}\noutput = \"o\"\ncache = \"c\"\n",
            path(&fixture())
        ),
    )
    .unwrap();
    let run = scenefuse(&["summarize", "--mock", "--config", path(&config)]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let fused = std::fs::read_to_string(dir.path().join("o/three_scenes/fusion_input.txt")).unwrap();
    assert!(!fused.contains("kissing"));
    assert!(!dir.path().join("o/three_scenes/prefs.json").exists());
    assert!(dir.path().join("c").is_dir());
}

#[test]
fn welch_statistics() {
    let v = json(&scenefuse(&["stats", "welch", "--a", "44.86,0.6,5", "--b", "42.24,0.42,5"]));
    assert!((v["t"].as_f64().unwrap() - 7.999).abs() < 0.01);
    assert!(v["df"].as_f64().unwrap() > 4.0);
}

#[test]
fn scene_split_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let ep = dir.path().join("marked");
    std::fs::create_dir(&ep).unwrap();
    let transcript = std::fs::read_to_string(fixture().join("transcript.txt")).unwrap();
    let lines: Vec<&str> = transcript.lines().collect();
    let marked = format!("{}\n[SCENE_BREAK]\n{}\n[SCENE_BREAK]\n{}\n", lines[..6].join("\n"), lines[6..12].join("\n"), lines[12..].join("\n"));
    std::fs::write(ep.join("transcript.txt"), marked).unwrap();
    for method in ["mdl", "uniform", "uniform-oracle"] {
        let v = json(&scenefuse(&["stats", "scene-split", "--method", method, "--episode", path(&ep)]));
        assert_eq!(v["episodes"][0]["acc"], 1.0, "{method}");
        assert_eq!(v["mean"]["nmi"], 1.0, "{method}");
        assert_eq!(v["mean"]["ari"], 1.0, "{method}");
    }
}

#[test]
fn exit_codes() {
    let bad = scenefuse(&["segment", "--config", "/nonexistent/config.toml"]);
    assert_eq!(bad.status.code(), Some(2));
    let missing = scenefuse(&["segment", "--episode", "/nonexistent/episode"]);
    assert_eq!(missing.status.code(), Some(4));
    let out = tempfile::tempdir().unwrap();
    let unconfigured = scenefuse(&["summarize", "--episode", path(&fixture()), "--out", path(out.path())]);
    assert_eq!(unconfigured.status.code(), Some(2), "{}", String::from_utf8_lossy(&unconfigured.stderr));
    let welch = scenefuse(&["stats", "welch", "--a", "1,0,3", "--b", "1,0,3"]);
    assert_eq!(welch.status.code(), Some(4));
    let malformed = scenefuse(&["stats", "welch", "--a", "1,2", "--b", "1,0,3"]);
    assert_eq!(malformed.status.code(), Some(2));
}

#[test]
fn http_backend_failure_is_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        "evaluate = false\n[backends.dialogue_summarizer]\nendpoint = \"http://127.0.0.1:9/v1\"\nretry_attempts = 1\n[backends.fusion_summarizer]\nkind = \"echo\"\n",
    )
    .unwrap();
    let run = scenefuse(&["summarize", "--config", path(&config), "--episode", path(&fixture()), "--out", path(dir.path())]);
    assert_eq!(run.status.code(), Some(3), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stderr).contains("summarize"));
}
