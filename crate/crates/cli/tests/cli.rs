use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_gesture-asr"));
    // Keep the caller's environment from leaking into the config.
    for (k, _) in std::env::vars() {
        if k.starts_with("GESTURE_ASR_") {
            c.env_remove(k);
        }
    }
    c
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn core_fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn mock_pipeline(manifest: &str, extra: &[&str]) -> Output {
    let cfg = fixtures().join("mock.toml");
    let m = core_fixtures().join("pipeline").join(manifest);
    let mut args = vec!["--config", path(&cfg), "pipeline", "--manifest", path(&m)];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn stats_matches_goldens() {
    let root = core_fixtures().join("corpus");
    for (format, golden) in [
        ("csv", "stats.csv"),
        ("table", "stats.txt"),
        ("json", "stats.json"),
    ] {
        let o = run(&["stats", "--root", path(&root), "--format", format]);
        assert_eq!(o.status.code(), Some(0));
        let expected =
            std::fs::read_to_string(core_fixtures().join("golden").join(golden)).unwrap();
        assert_eq!(stdout(&o), expected, "{format}");
    }
    let o = run(&["--json", "stats", "--root", path(&root)]);
    assert_eq!(
        stdout(&o),
        std::fs::read_to_string(core_fixtures().join("golden/stats.json")).unwrap()
    );
}

#[test]
fn stats_rejects_unknown_format() {
    let root = core_fixtures().join("corpus");
    let o = run(&["stats", "--root", path(&root), "--format", "xml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn wer_manifest_matches_hand_computation() {
    let pairs = fixtures().join("pairs.jsonl");
    let o = run(&["--json", "wer", "--manifest", path(&pairs)]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    // 1/3, 0, 2, 2/3, 1/2; p6 has no words in its reference.
    let wers: Vec<f64> = v["items"]
        .as_array()
        .unwrap()
        .iter()
        .map(|i| i["wer"].as_f64().unwrap())
        .collect();
    let expected = [1.0 / 3.0, 0.0, 2.0, 2.0 / 3.0, 0.5];
    for (w, e) in wers.iter().zip(expected) {
        assert!((w - e).abs() < 1e-12, "{wers:?}");
    }
    assert_eq!(wers.len(), 5);
    assert!((v["average_wer"].as_f64().unwrap() - 0.7).abs() < 1e-12);
    assert!((v["micro_wer"].as_f64().unwrap() - 6.0 / 11.0).abs() < 1e-12);
    assert_eq!(v["skipped"], serde_json::json!(["p6"]));

    let o = run(&["wer", "--manifest", path(&pairs)]);
    assert_eq!(
        stdout(&o),
        std::fs::read_to_string(fixtures().join("wer_table.golden")).unwrap()
    );
}

#[test]
fn wer_normalization_follows_config() {
    let pairs = fixtures().join("pairs.jsonl");
    let o = bin()
        .args(["--json", "wer", "--manifest", path(&pairs)])
        .env("GESTURE_ASR_DROP_FILLERS", "true")
        .output()
        .unwrap();
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    // Without fillers p4 is 1/3 and p5 is 1/2: (1/3 + 0 + 2 + 1/3 + 1/2) / 5.
    assert!((v["average_wer"].as_f64().unwrap() - 19.0 / 30.0).abs() < 1e-12);
    assert_eq!(v["normalization"]["drop_fillers"], true);
}

#[test]
fn wer_directories_pair_by_stem() {
    let dir = tempfile::tempdir().unwrap();
    let (r, h) = (dir.path().join("ref"), dir.path().join("hyp"));
    std::fs::create_dir_all(&r).unwrap();
    std::fs::create_dir_all(&h).unwrap();
    std::fs::write(r.join("a.txt"), "i cut tomato").unwrap();
    std::fs::write(h.join("a.txt"), "i tomato").unwrap();
    std::fs::write(r.join("b.txt"), "and eating").unwrap();
    let o = run(&[
        "--json",
        "wer",
        "--ref-dir",
        path(&r),
        "--hyp-dir",
        path(&h),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    // b has no hypothesis: two deletions out of two.
    assert!((v["average_wer"].as_f64().unwrap() - (1.0 / 3.0 + 1.0) / 2.0).abs() < 1e-12);
}

#[test]
fn wer_usage_errors() {
    assert_eq!(run(&["wer"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let dup = dir.path().join("dup.jsonl");
    std::fs::write(
        &dup,
        "{\"id\":\"a\",\"ref\":\"x\",\"hyp\":\"x\"}\n{\"id\":\"a\",\"ref\":\"y\",\"hyp\":\"y\"}\n",
    )
    .unwrap();
    assert_eq!(
        run(&["wer", "--manifest", path(&dup)]).status.code(),
        Some(2)
    );
}

#[test]
fn filter_keeps_strictly_above_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("t.json");
    std::fs::write(
        &input,
        r#"{"audio_id": "audio-17", "source": "fixture", "tokens": [
            {"text": "I", "confidence": 0.9},
            {"text": "um", "confidence": 0.15},
            {"text": "tomato", "confidence": 0.8},
            {"text": "so", "confidence": 0.2}]}"#,
    )
    .unwrap();
    let o = run(&["--json", "filter", "--input", path(&input)]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let texts: Vec<&str> = v["tokens"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t["text"].as_str().unwrap())
        .collect();
    assert_eq!(texts, ["I", "tomato"]);
    assert_eq!(v["filter"]["removed"], 2);

    let o = run(&["filter", "--inclusive", "--input", path(&input)]);
    assert_eq!(stdout(&o), "I tomato so\n");
    let o = run(&["--threshold", "0.85", "filter", "--input", path(&input)]);
    assert_eq!(stdout(&o), "I\n");
}

#[test]
fn parse_prints_canonical_form() {
    let cha = core_fixtures().join("pipeline/case_rows.cha");
    let o = run(&["parse", path(&cha)]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("*PAR:\t[gesture:folding] uz@u uh right yes ."));
    // The canonical form is a fixed point.
    let dir = tempfile::tempdir().unwrap();
    let again = dir.path().join("again.cha");
    std::fs::write(&again, &text).unwrap();
    assert_eq!(stdout(&run(&["parse", path(&again)])), text);

    let o = run(&["--json", "parse", path(&cha)]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["utterances"].as_array().unwrap().len(), 3);
}

#[test]
fn parse_directory_reports_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("good.cha"),
        "@Begin\n*PAR:\tand [gesture:eating] .\n@End\n",
    )
    .unwrap();
    std::fs::write(dir.path().join("bad.cha"), [0xff, 0xfe, 0x00]).unwrap();
    let o = run(&["--json", "parse", path(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["files"].as_array().unwrap().len(), 1);
    assert_eq!(v["diagnostics"].as_array().unwrap().len(), 1);
}

#[test]
fn gestures_from_annotations_and_frames() {
    let cha = core_fixtures().join("pipeline/case_rows.cha");
    let o = run(&["gestures", "--cha", path(&cha)]);
    assert_eq!(
        stdout(&o),
        "folding\t3000_5200\t0\ncutting\t6000_8400\t1\ncutting\t6000_8400\t1\neating\t9000_9900\t2\n"
    );

    let cfg = fixtures().join("mock.toml");
    let frames = core_fixtures().join("pipeline/frames/row4");
    let o = run(&[
        "--config",
        path(&cfg),
        "--json",
        "gestures",
        "--frames",
        path(&frames),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v[0]["label"], "eating");

    let o = bin()
        .args([
            "--config",
            path(&cfg),
            "gestures",
            "--frames",
            path(&frames),
        ])
        .env("GESTURE_ASR_MOCK_FAIL_GESTURE", "row4")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));

    // No vision backend configured and no --mock.
    assert_eq!(
        run(&["gestures", "--frames", path(&frames)]).status.code(),
        Some(2)
    );
}

#[test]
fn rewrite_with_mock() {
    let o = run(&[
        "--mock",
        "rewrite",
        "--text",
        "I um tomato",
        "--gesture",
        "cutting",
    ]);
    assert_eq!(stdout(&o), "I cut tomato\n");
    let o = run(&[
        "--mock",
        "--json",
        "rewrite",
        "--text",
        "and",
        "--gesture",
        "eating",
        "--id",
        "4",
    ]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["final_text"], "and eating");
    assert_eq!(v["utterance_id"], "4");
    assert_eq!(v["provenance"]["rewriter"], "mock-rewriter");
    // A real rewriter needs an endpoint.
    assert_eq!(run(&["rewrite", "--text", "and"]).status.code(), Some(2));
}

#[test]
fn pipeline_and_case_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.json");
    let o = mock_pipeline("case_rows.jsonl", &["--out", path(&out)]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let table = stdout(&o);
    assert!(table.starts_with("Index | Original"));

    let o = run(&["case-report", "--report", path(&out)]);
    assert_eq!(stdout(&o), table);
    let header = table.lines().next().unwrap();
    let cols: Vec<&str> = header.split('|').map(str::trim).collect();
    assert_eq!(cols, ["Index", "Original", "ASR", "Ours"]);

    let o = run(&["--json", "case-report", "--report", path(&out)]);
    let rows: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rows[1]["ours"], "cutting banana");
    assert_eq!(rows[1]["asr"], "Um... Banana.");
    assert_eq!(rows[2]["original"], "and [gesture:eating] .");
}

fn without_timing(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timing");
    v
}

#[test]
fn pipeline_json_is_deterministic_across_parallelism() {
    let a: Value =
        serde_json::from_slice(&mock_pipeline("case_rows_vision.jsonl", &["--json"]).stdout)
            .unwrap();
    let cfg = fixtures().join("mock.toml");
    let m = core_fixtures().join("pipeline/case_rows_vision.jsonl");
    let o = run(&[
        "--config",
        path(&cfg),
        "--json",
        "--parallel",
        "4",
        "pipeline",
        "--manifest",
        path(&m),
    ]);
    let b: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(without_timing(a), without_timing(b));
}

#[test]
fn pipeline_failures_exit_one() {
    let o = mock_pipeline("missing_audio.jsonl", &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("row9 failed at asr"));
}

#[test]
fn config_errors_exit_two() {
    let m = core_fixtures().join("pipeline/case_rows.jsonl");
    assert_eq!(
        run(&[
            "--mock",
            "--threshold",
            "1.5",
            "pipeline",
            "--manifest",
            path(&m)
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        run(&[
            "--mock",
            "--parallel",
            "0",
            "pipeline",
            "--manifest",
            path(&m)
        ])
        .status
        .code(),
        Some(2)
    );
    let o = bin()
        .args(["--mock", "pipeline", "--manifest", path(&m)])
        .env("GESTURE_ASR_THRESHOLD", "-0.1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "treshold = 0.3\n").unwrap();
    assert_eq!(
        run(&["--config", path(&bad), "stats", "--root", "."])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["--config", "/nonexistent.toml", "stats", "--root", "."])
            .status
            .code(),
        Some(2)
    );
    let missing = dir.path().join("none.jsonl");
    assert_eq!(
        run(&["--mock", "pipeline", "--manifest", path(&missing)])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn flags_override_env_which_overrides_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "threshold = 0.9\n").unwrap();
    let input = dir.path().join("t.json");
    std::fs::write(
        &input,
        r#"{"audio_id": "a", "source": "s", "tokens": [{"text": "lo", "confidence": 0.3}, {"text": "mid", "confidence": 0.6}, {"text": "hi", "confidence": 0.95}]}"#,
    )
    .unwrap();
    let filter = |env: Option<&str>, flag: Option<&str>| {
        let mut c = bin();
        c.args(["--config", path(&cfg)]);
        if let Some(f) = flag {
            c.args(["--threshold", f]);
        }
        if let Some(e) = env {
            c.env("GESTURE_ASR_THRESHOLD", e);
        }
        c.args(["filter", "--input", path(&input)]);
        stdout(&c.output().unwrap())
    };
    assert_eq!(filter(None, None), "hi\n");
    assert_eq!(filter(Some("0.5"), None), "mid hi\n");
    assert_eq!(filter(Some("0.5"), Some("0.1")), "lo mid hi\n");
}

#[test]
fn usage_errors_print_help_and_exit_two() {
    for args in [
        &[][..],
        &["frobnicate"],
        &["stats"],
        &["--parallel", "x", "stats", "--root", "."],
    ] {
        let o = run(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(
            String::from_utf8_lossy(&o.stderr).contains("Commands:"),
            "{args:?}"
        );
    }
    let o = run(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("case-report"));
}
