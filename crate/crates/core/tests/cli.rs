mod common;

use std::io::Write;
use std::process::{Command, Output, Stdio};

use aspectsum::harness::synthetic::{planted_corpus, PlantedOptions};
use aspectsum::harness::write_dataset;
use common::{chat_reply, dead_url, scripted_chat, FakeServer};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aspectsum"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn with_stdin(args: &[&str], input: &str) -> Output {
    let mut child =
        bin().args(args).stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped()).spawn().unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn dataset(dir: &std::path::Path, n: usize) -> String {
    let path = dir.join("data.jsonl");
    let records: Vec<_> = planted_corpus(n, 0, &PlantedOptions::default()).into_iter().map(|d| d.record).collect();
    write_dataset(&path, &records).unwrap();
    path.to_str().unwrap().to_string()
}

const DOC: &str = "The minister spoke about trade. Hospitals reported fewer health emergencies this winter. \
                   Football fans gathered downtown. New health clinics opened in rural areas.";

#[test]
fn prune_reads_stdin() {
    let o = with_stdin(
        &["prune", "--document", "-", "--aspect", "health", "--bypass-threshold", "1", "--budget-w", "10"],
        DOC,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("health"), "{out}");
    assert!(out.trim().len() < DOC.len());
}

#[test]
fn prune_json_output() {
    let o = with_stdin(&["prune", "--document", "-", "--aspect", "health", "--json"], DOC);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    // under the default threshold the document is passed through
    assert_eq!(v["bypassed"], true);
    assert_eq!(v["sentences"].as_array().unwrap().len(), 4);
}

#[test]
fn summarize_with_lead_generator() {
    let o = with_stdin(&["summarize", "--document", "-", "--aspect", "health", "--generator", "lead"], DOC);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("The minister spoke"));
}

#[test]
fn summarize_against_chat_endpoint() {
    let server = FakeServer::start(|_, req| (200, scripted_chat(req)));
    let o = with_stdin(&["summarize", "--document", "-", "--aspect", "health", "--llm-url", &server.url], DOC);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("health:"));
}

#[test]
fn remote_failure_exits_with_2() {
    let url = dead_url();
    let o = with_stdin(&["summarize", "--document", "-", "--aspect", "health", "--llm-url", &url], DOC);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_errors_exit_with_1() {
    assert_eq!(run(&["run"]).status.code(), Some(1));
    assert_eq!(run(&["run", "--config", "/no/such/config.toml"]).status.code(), Some(1));
    assert_eq!(run(&["run", "--method", "magic"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path(), 2);
    assert_eq!(run(&["run", "--dataset", &data, "--recursion-decay", "1.5"]).status.code(), Some(1));
    assert_eq!(run(&["ablate-chunk-size", "--dataset", &data, "--sizes", "64"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn failure_budget_exits_with_3() {
    let server = FakeServer::start(|n, _| if n == 0 { (200, chat_reply("ok")) } else { (400, "bad".into()) });
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path(), 4);
    let o = run(&["run", "--dataset", &data, "--llm-url", &server.url, "--workers", "1"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn run_prints_summary_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path(), 3);
    let out = dir.path().join("out");
    let o = run(&["run", "--dataset", &data, "--generator", "lead", "--output", out.to_str().unwrap()]);
    assert!(o.status.success());
    let summary: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(summary["evaluated"], 3);
    assert_eq!(summary["config"]["generator"]["backend"], "lead");
    for f in ["summary.json", "records.jsonl", "prompts.jsonl"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path(), 2);
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        format!("method = \"original\"\n[dataset]\npath = \"{data}\"\n[generator]\nbackend = \"lead\"\n"),
    )
    .unwrap();
    let o = run(&["run", "--config", cfg.to_str().unwrap(), "--method", "saresg", "--budget-w", "17"]);
    assert!(o.status.success());
    let summary: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(summary["method"], "saresg");
    assert_eq!(summary["config"]["prune"]["per_chunk_budget_w"], 17);
}

#[test]
fn evaluate_line_aligned_files() {
    let dir = tempfile::tempdir().unwrap();
    let (c, r) = (dir.path().join("c.txt"), dir.path().join("r.txt"));
    std::fs::write(&c, "the cat sat\n").unwrap();
    std::fs::write(&r, "the cat ran\n").unwrap();
    let o = run(&["evaluate", "--candidates", c.to_str().unwrap(), "--references", r.to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["mean"]["rouge1"]["f1"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    std::fs::write(&r, "one\ntwo\n").unwrap();
    let o = run(&["evaluate", "--candidates", c.to_str().unwrap(), "--references", r.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn ablate_sentence_prints_two_rows() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path(), 3);
    let o = run(&[
        "ablate-sentence",
        "--dataset",
        &data,
        "--generator",
        "lead",
        "--bypass-threshold",
        "1",
        "--budget-w",
        "30",
    ]);
    assert!(o.status.success());
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("chunk,") && rows[1].starts_with("sentence,"));
}
