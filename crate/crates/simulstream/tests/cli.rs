//! End-to-end checks of the `simulstream` binary: subcommands, file
//! outputs and exit codes (0 success, 1 config error, 2 backend error,
//! 3 partial failures).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_simulstream"))
}

fn write_demo_inputs(dir: &Path) -> (PathBuf, PathBuf) {
    let fixtures = dir.join("fixtures");
    fs::create_dir_all(&fixtures).unwrap();
    fs::create_dir_all(dir.join("backgrounds")).unwrap();
    let mut manifest = String::new();
    for i in 0..3 {
        let fixture = fixtures.join(format!("s{i}.jsonl"));
        let mut lines = String::new();
        for w in 0..5 {
            lines.push_str(&format!(
                "{{\"word\":\"word{w}\",\"end_ms\":{}}}\n",
                (w + 1) * 400
            ));
        }
        fs::write(&fixture, lines).unwrap();
        manifest.push_str(&format!(
            "{{\"id\":\"s{i}\",\"fixture_path\":\"fixtures/s{i}.jsonl\",\"reference\":\"eine gute Übersetzung hier\",\"background_id\":\"talk\"}}\n"
        ));
    }
    fs::write(
        dir.join("backgrounds/talk.json"),
        r#"{"topic":"Demo","named_entities":[{"entity":"X","description":"marks the spot"}]}"#,
    )
    .unwrap();
    let manifest_path = dir.join("manifest.jsonl");
    fs::write(&manifest_path, manifest).unwrap();
    let script_path = dir.join("script.json");
    let script = serde_json::json!({
        "*": ["Eine", " gute", "<|eot_id|>", " Übersetzung", "<|eot_id|>", " hier", "<|eot_id|>"]
    });
    fs::write(&script_path, script.to_string()).unwrap();
    (manifest_path, script_path)
}

#[test]
fn run_writes_records_report_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, script) = write_demo_inputs(dir.path());
    let out = dir.path().join("out");
    let output = bin()
        .args(["run", "--manifest"])
        .arg(&manifest)
        .arg("--llm-script")
        .arg(&script)
        .args(["--min-read-time", "600", "--out-dir"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let records = fs::read_to_string(out.join("records.jsonl")).unwrap();
    assert_eq!(records.lines().count(), 3);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(report["bleu"].as_f64().unwrap() > 0.0);
    assert!(report["rtf"].is_null(), "mock runs must not fabricate RTF");
    let csv = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(csv.starts_with("config,min_read_time_ms,bleu,al_ms,laal_ms,wer,rtf\n"));
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn score_reproduces_the_run_report() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, script) = write_demo_inputs(dir.path());
    let out = dir.path().join("out");
    let status = bin()
        .args(["run", "--manifest"])
        .arg(&manifest)
        .arg("--llm-script")
        .arg(&script)
        .args(["--min-read-time", "600", "--out-dir"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let output = bin()
        .args(["score", "--records"])
        .arg(out.join("records.jsonl"))
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    let json_start = stdout.find('{').unwrap();
    let rescored: serde_json::Value = serde_json::from_str(&stdout[json_start..]).unwrap();
    let original: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(rescored, original, "score must equal the run-time report");
}

#[test]
fn curve_emits_one_row_per_sweep_point() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, script) = write_demo_inputs(dir.path());
    let out = dir.path().join("curve_out");
    let output = bin()
        .args(["curve", "--manifest"])
        .arg(&manifest)
        .arg("--llm-script")
        .arg(&script)
        .args(["--sweep", "1200,1500,1800", "--out-dir"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let csv = fs::read_to_string(out.join("curve.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4, "header plus three sweep rows");
    for (line, min_read) in lines[1..].iter().zip(["1200", "1500", "1800"]) {
        assert_eq!(line.split(',').nth(1).unwrap(), min_read);
    }
}

#[test]
fn extract_background_writes_documents_from_mock() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("talk1.txt"), "A talk about oceans and COP28.").unwrap();
    fs::write(dir.path().join("talk2.txt"), "A talk about satellites.").unwrap();
    let doc = r#"{"topic":"Oceans","named_entities":[{"entity":"COP28","description":"climate conference"},{"entity":"troposphere","description":"lowest atmosphere layer"},{"entity":"Inflation Reduction Act","description":"US legislation"},{"entity":"Paris Agreement","description":"climate treaty"}]}"#;
    let script = serde_json::json!({
        "talk1": [format!("Here you go:\n```json\n{doc}\n```"), "<|eot_id|>"],
        "talk2": ["no structure at all", "<|eot_id|>", "still chatting", "<|eot_id|>", "sorry!", "<|eot_id|>"]
    });
    let script_path = dir.path().join("extract_script.json");
    fs::write(&script_path, script.to_string()).unwrap();
    let out = dir.path().join("backgrounds");
    let output = bin()
        .arg("extract-background")
        .arg("--input")
        .arg(dir.path().join("talk1.txt"))
        .arg("--input")
        .arg(dir.path().join("talk2.txt"))
        .arg("--llm-script")
        .arg(&script_path)
        .arg("--out-dir")
        .arg(&out)
        .args(["--retries", "2"])
        .output()
        .unwrap();
    // talk2 never yields a document: partial failure, exit 3.
    assert_eq!(output.status.code(), Some(3));
    let doc1 = fs::read_to_string(out.join("talk1.json")).unwrap();
    let parsed = simulstream::prompt::load_background(&doc1).unwrap();
    assert_eq!(parsed.topic, "Oceans");
    assert_eq!(parsed.named_entities.len(), 4);
    assert!(!out.join("talk2.json").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("extraction_summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["failures"].as_array().unwrap().len(), 1);
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, _) = write_demo_inputs(dir.path());
    // Missing completion backend entirely.
    let output = bin()
        .args(["run", "--manifest"])
        .arg(&manifest)
        .arg("--out-dir")
        .arg(dir.path().join("x"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn unreachable_backend_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, _) = write_demo_inputs(dir.path());
    let output = bin()
        .args(["run", "--manifest"])
        .arg(&manifest)
        .args([
            "--llm-endpoint",
            "http://127.0.0.1:1",
            "--llm-model",
            "m",
            "--out-dir",
        ])
        .arg(dir.path().join("x"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn script_gaps_fail_fast_before_any_session() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, _) = write_demo_inputs(dir.path());
    let script_path = dir.path().join("partial_script.json");
    fs::write(&script_path, r#"{"s0": ["x", "<|eot_id|>"]}"#).unwrap();
    let out = dir.path().join("out");
    let output = bin()
        .args(["run", "--manifest"])
        .arg(&manifest)
        .arg("--llm-script")
        .arg(&script_path)
        .arg("--out-dir")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("s1") && stderr.contains("s2"));
    assert!(!out.join("records.jsonl").exists() || fs::read_to_string(out.join("records.jsonl")).unwrap().is_empty());
}

#[test]
fn malformed_record_line_aborts_score_with_its_number() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, script) = write_demo_inputs(dir.path());
    let out = dir.path().join("out");
    assert!(bin()
        .args(["run", "--manifest"])
        .arg(&manifest)
        .arg("--llm-script")
        .arg(&script)
        .args(["--min-read-time", "600", "--out-dir"])
        .arg(&out)
        .status()
        .unwrap()
        .success());
    let records_path = out.join("records.jsonl");
    let mut content = fs::read_to_string(&records_path).unwrap();
    content.push_str("{\"truncated\": \n");
    fs::write(&records_path, content).unwrap();
    let output = bin()
        .args(["score", "--records"])
        .arg(&records_path)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains(":4:"));
}
