//! End-to-end tests that drive the compiled `ritfis` binary: config
//! validation, a full surrogate campaign, report rebuilds from the log, and
//! the error paths a user is most likely to hit.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::tempdir;

fn ritfis(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ritfis"))
        .args(args)
        .env_remove("RITFIS_API_KEY")
        .output()
        .expect("binary launches")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("stdout is utf-8")
}

fn stderr(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).expect("stderr is utf-8")
}

/// Six five-word reviews where exactly one scored word decides the label and
/// the synonym table can always flip it.
fn write_fixture(dir: &Path) -> PathBuf {
    let dataset = r#"{"id": "r0", "text": "good film with fine acting", "label": "positive"}
{"id": "r1", "text": "good film with neat acting", "label": "positive"}
{"id": "r2", "text": "good film with warm acting", "label": "positive"}
{"id": "r3", "text": "awful movie with flat pacing", "label": "negative"}
{"id": "r4", "text": "awful movie with slow pacing", "label": "negative"}
{"id": "r5", "text": "awful movie with loud pacing", "label": "negative"}
"#;
    fs::write(dir.join("dataset.jsonl"), dataset).expect("write dataset");

    let lexicon = r#"{
  "weights": {
    "positive": {"good": 2.0, "great": 2.0},
    "negative": {"bad": 2.0, "awful": 2.0}
  }
}
"#;
    fs::write(dir.join("lexicon.json"), lexicon).expect("write lexicon");
    fs::write(dir.join("synonyms.tsv"), "good\tbad\t0.9\nawful\tgreat\t0.9\n")
        .expect("write synonyms");

    let config = r#"seed = 5
workers = 2

[dataset]
path = "dataset.jsonl"
format = "jsonl"
name = "reviews"
labels = ["positive", "negative"]

[prompt]
prefix = "Classify the sentiment of this review as positive or negative:"

[model]
adapter = "surrogate"
lexicon = "lexicon.json"

[method]
preset = "textfooler"
synonym_limit = 4

[resources]
synonyms = "synonyms.tsv"
"#;
    let path = dir.join("campaign.toml");
    fs::write(&path, config).expect("write config");
    path
}

fn run_fixture_campaign(dir: &Path) -> PathBuf {
    let config = write_fixture(dir);
    let out = dir.join("out");
    let output = ritfis(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        output.status.success(),
        "run failed: {}",
        stderr(&output)
    );
    out
}

#[test]
fn validate_reports_dataset_method_and_model() {
    let dir = tempdir().unwrap();
    let config = write_fixture(dir.path());
    let output = ritfis(&["validate", "--config", config.to_str().unwrap()]);
    assert!(output.status.success(), "{}", stderr(&output));
    assert_eq!(
        stdout(&output),
        "ok: dataset reviews (6 examples), method textfooler, model surrogate\n"
    );
}

#[test]
fn validate_rejects_unknown_keys() {
    let dir = tempdir().unwrap();
    let config = write_fixture(dir.path());
    let mut text = fs::read_to_string(&config).unwrap();
    text.insert_str(0, "turbo = true\n");
    fs::write(&config, text).unwrap();

    let output = ritfis(&["validate", "--config", config.to_str().unwrap()]);
    assert!(!output.status.success());
    let message = stderr(&output);
    assert!(message.starts_with("error:"), "unexpected stderr: {message}");
    assert!(message.contains("turbo"), "should name the bad key: {message}");
}

#[test]
fn run_writes_log_sidecar_and_reports() {
    let dir = tempdir().unwrap();
    let config = write_fixture(dir.path());
    let out = dir.path().join("out");
    let output = ritfis(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", stderr(&output));

    for file in ["outcomes.jsonl", "campaign.json", "report.json", "report.md"] {
        assert!(out.join(file).is_file(), "{file} missing");
    }
    let printed = stdout(&output);
    assert!(printed.contains("# Robustness campaign"));
    assert!(printed.contains("| textfooler |"));
    assert!(stderr(&output).contains("6 of 6 examples logged to"));

    let log = fs::read_to_string(out.join("outcomes.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 6);
}

#[test]
fn rebuilt_json_report_matches_the_file_on_disk() {
    let dir = tempdir().unwrap();
    let out = run_fixture_campaign(dir.path());
    let log = out.join("outcomes.jsonl");

    let output = ritfis(&["report", "--log", log.to_str().unwrap(), "--format", "json"]);
    assert!(output.status.success(), "{}", stderr(&output));
    let written = fs::read_to_string(out.join("report.json")).unwrap();
    assert_eq!(stdout(&output), written);
}

#[test]
fn rebuilt_markdown_report_matches_the_file_on_disk() {
    let dir = tempdir().unwrap();
    let out = run_fixture_campaign(dir.path());
    let log = out.join("outcomes.jsonl");

    let output = ritfis(&[
        "report",
        "--log",
        log.to_str().unwrap(),
        "--format",
        "markdown",
    ]);
    assert!(output.status.success(), "{}", stderr(&output));
    let written = fs::read_to_string(out.join("report.md")).unwrap();
    assert_eq!(stdout(&output), written);
}

#[test]
fn report_requires_the_campaign_sidecar() {
    let dir = tempdir().unwrap();
    let out = run_fixture_campaign(dir.path());
    let orphan_dir = dir.path().join("orphan");
    fs::create_dir(&orphan_dir).unwrap();
    let orphan = orphan_dir.join("outcomes.jsonl");
    fs::copy(out.join("outcomes.jsonl"), &orphan).unwrap();

    let output = ritfis(&["report", "--log", orphan.to_str().unwrap(), "--format", "json"]);
    assert!(!output.status.success());
    assert!(
        stderr(&output).contains("campaign.json"),
        "should point at the missing sidecar: {}",
        stderr(&output)
    );
}

#[test]
fn report_format_flag_is_required() {
    let dir = tempdir().unwrap();
    let out = run_fixture_campaign(dir.path());
    let log = out.join("outcomes.jsonl");

    let output = ritfis(&["report", "--log", log.to_str().unwrap()]);
    assert!(!output.status.success());
    assert!(stderr(&output).contains("--format"));
}

#[test]
fn a_second_run_reuses_the_finished_log() {
    let dir = tempdir().unwrap();
    let out = run_fixture_campaign(dir.path());
    let before = fs::read_to_string(out.join("outcomes.jsonl")).unwrap();

    let config = dir.path().join("campaign.toml");
    let output = ritfis(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", stderr(&output));
    assert!(stderr(&output).contains("6 of 6 examples logged to"));

    let after = fs::read_to_string(out.join("outcomes.jsonl")).unwrap();
    assert_eq!(before, after, "a finished log must not grow on rerun");
}

#[test]
fn perturbing_the_prompt_still_completes() {
    let dir = tempdir().unwrap();
    let config = write_fixture(dir.path());
    let out = dir.path().join("out-prompt");
    let output = ritfis(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--perturb-prompt",
    ]);
    assert!(output.status.success(), "{}", stderr(&output));
    assert!(stderr(&output).contains("6 of 6 examples logged to"));
}

#[test]
fn run_requires_an_output_directory() {
    let dir = tempdir().unwrap();
    let config = write_fixture(dir.path());
    let output = ritfis(&["run", "--config", config.to_str().unwrap()]);
    assert!(!output.status.success());
    assert!(
        stderr(&output).contains("output"),
        "should explain the missing output directory: {}",
        stderr(&output)
    );
}

#[test]
fn run_fails_fast_when_the_endpoint_is_unreachable() {
    let dir = tempdir().unwrap();
    write_fixture(dir.path());
    let config = dir.path().join("http.toml");
    let toml = r#"seed = 5

[dataset]
path = "dataset.jsonl"
format = "jsonl"
labels = ["positive", "negative"]

[prompt]
prefix = "Classify the sentiment of this review as positive or negative:"

[model]
adapter = "http"
url = "http://127.0.0.1:9/v1/chat/completions"
name = "dead-model"

[method]
preset = "textfooler"
"#;
    fs::write(&config, toml).unwrap();

    let out = dir.path().join("out-http");
    let output = ritfis(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!output.status.success());
    assert!(stderr(&output).starts_with("error:"));
    assert!(
        !out.join("outcomes.jsonl").exists(),
        "no searches may run against an unreachable endpoint"
    );
}
