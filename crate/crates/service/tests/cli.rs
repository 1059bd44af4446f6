//! The `webrag` binary, run as a subprocess in offline mode.

use std::path::Path;
use std::process::{Command, Output};

const Q37: &str = "A 6-year-old boy presents with fever, weight loss and constipation. Imaging shows a large liver mass; ultrasound-guided biopsy is planned. What is the most likely diagnosis?";

fn webrag(data_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_webrag"))
        .arg("--offline")
        .arg("--data-dir")
        .arg(data_dir)
        .args(args)
        .env_remove("WEBRAG_CONFIG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn ask_prints_answer_source_and_timings() {
    let dir = tempfile::tempdir().unwrap();
    let o = webrag(dir.path(), &["ask", "--mode", "rag", "--question", Q37]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("undifferentiated embryonal sarcoma"), "{out}");
    assert!(out.contains(
        "<https://radiopaedia.org/articles/undifferentiated-embryonal-sarcoma-of-the-liver>"
    ));
    assert!(out.contains("Timings: keyphrase_extraction 0 ms, source_search 0 ms"));

    let o = webrag(
        dir.path(),
        &["ask", "--json", "--mode", "conventional", "--question", Q37],
    );
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["mode"], "conventional");
    assert_eq!(v["sources"], serde_json::json!([]));
}

#[test]
fn eval_grade_report_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let o = webrag(
        dir.path(),
        &[
            "eval",
            "--dataset",
            "extendedqa.jsonl",
            "--modes",
            "rag,conventional",
            "--profile",
            "mock",
            "--run-id",
            "r1",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("run r1: 48 trace(s) for 24 item(s) x 2 condition(s), 0 failed"));
    let traces = std::fs::read_to_string(dir.path().join("runs/r1/traces.jsonl")).unwrap();
    assert_eq!(traces.lines().count(), 48);

    let o = webrag(dir.path(), &["report", "--run", "r1"]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("48 trace(s) are not graded"), "{err}");
    let first_id = traces.lines().next().unwrap();
    let first_id: serde_json::Value = serde_json::from_str(first_id).unwrap();
    assert!(err.contains(first_id["trace_id"].as_str().unwrap()));

    let o = webrag(dir.path(), &["grade", "--run", "r1", "--auto"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        stdout(&o).trim(),
        "run r1: recorded 48 grade(s), 34 correct"
    );

    let o = webrag(dir.path(), &["report", "--run", "r1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(
        out.contains("rag+mock   79 ± 8 [95% CI: 63, 92] (19/24)"),
        "{out}"
    );
    assert!(out.contains("Context relevant: 79% (19/24)"));

    // resuming a complete run re-executes nothing
    let o = webrag(dir.path(), &["eval", "--resume", "r1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let after = std::fs::read_to_string(dir.path().join("runs/r1/traces.jsonl")).unwrap();
    assert_eq!(after, traces);

    let o = webrag(dir.path(), &["runs"]);
    assert_eq!(stdout(&o).trim(), "r1\textendedqa\tComplete\t48/48");
}

#[test]
fn seed_changes_only_the_bootstrap() {
    let dir = tempfile::tempdir().unwrap();
    let run = |args: &[&str]| {
        let o = webrag(dir.path(), args);
        assert!(o.status.success(), "{}", stderr(&o));
        stdout(&o)
    };
    run(&["eval", "--dataset", "extendedqa", "--run-id", "s"]);
    run(&["grade", "--run", "s", "--auto"]);
    let a = run(&["report", "--run", "s", "--seed", "1"]);
    let b = run(&["report", "--run", "s", "--seed", "1"]);
    let c = run(&["report", "--run", "s", "--seed", "2"]);
    assert_eq!(a, b);
    assert!(a.contains("seed 1,") && c.contains("seed 2,"));
    let counts = |s: &str| s.lines().filter(|l| l.contains("(19/24)")).count();
    assert_eq!(counts(&a), counts(&c));
}

#[test]
fn import_rejects_invalid_records_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let o = webrag(
        dir.path(),
        &[
            "eval",
            "--dataset",
            "extendedqa",
            "--modes",
            "conventional",
            "--run-id",
            "c",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let traces = std::fs::read_to_string(dir.path().join("runs/c/traces.jsonl")).unwrap();
    let id: serde_json::Value = serde_json::from_str(traces.lines().next().unwrap()).unwrap();
    let id = id["trace_id"].as_str().unwrap();
    let file = dir.path().join("grades.jsonl");
    std::fs::write(
        &file,
        format!(
            "{{\"trace_id\":\"{id}\",\"correct\":1,\"context_relevant\":0,\"grader\":\"human\"}}\n"
        ),
    )
    .unwrap();
    let o = webrag(
        dir.path(),
        &["grade", "--run", "c", "--import", file.to_str().unwrap()],
    );
    assert!(!o.status.success());
    assert!(stderr(&o).contains("rag traces only"), "{}", stderr(&o));
    assert!(!dir.path().join("runs/c/grades.jsonl").exists());
}

#[test]
fn bad_configuration_fails_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("webrag.toml");
    std::fs::write(&cfg, "[profiles.remote]\nendpoint = \"https://example.org/v1\"\nmodel_id = \"m\"\napi_key = \"sk-inline\"\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_webrag"))
        .args(["--config", cfg.to_str().unwrap(), "datasets"])
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(stderr(&o).contains("api_key"), "{}", stderr(&o));

    let o = webrag(dir.path(), &["eval", "--dataset", "nope"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("dataset \"nope\""), "{}", stderr(&o));
}

#[test]
fn datasets_lists_the_bundled_sets() {
    let dir = tempfile::tempdir().unwrap();
    let o = webrag(dir.path(), &["datasets"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(
        out.lines().any(|l| l.starts_with("extendedqa\t24 items\t")),
        "{out}"
    );
    assert!(out
        .lines()
        .any(|l| l.starts_with("rsna_radioqa_metadata\t79 items\t")));
}
