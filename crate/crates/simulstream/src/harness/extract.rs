//! Background-document extraction: prompt a completion backend with a talk
//! transcript, locate the structured document in its response, and write one
//! JSON file per talk.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::llm::{complete_raw, LlmBackend};
use crate::prompt::{build_extraction_prompt, parse_extraction_response};
use crate::remote::{probe_endpoint, HttpLlm};

use super::{HarnessError, LlmMode, ScriptBook};

/// Fragment budget for one extraction response.
const MAX_EXTRACTION_TOKENS: usize = 4096;

#[derive(Debug, Clone)]
pub struct ExtractionConfig {
    pub inputs: Vec<PathBuf>,
    pub llm: LlmMode,
    pub out_dir: PathBuf,
    /// Additional attempts after the first failure.
    pub retries: usize,
    pub llm_api_key: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct ExtractionSummary {
    pub written: Vec<String>,
    pub failures: Vec<ExtractionFailure>,
}

#[derive(Debug, Serialize)]
pub struct ExtractionFailure {
    pub talk_id: String,
    pub error: String,
}

enum Backend {
    Script(ScriptBook),
    Http(HttpLlm),
}

/// Extract one background document per input text. Failures are retried up
/// to the configured count, then reported per talk; other talks continue.
pub fn cmd_extract_background(cfg: &ExtractionConfig) -> Result<ExtractionSummary, HarnessError> {
    if cfg.inputs.is_empty() {
        return Err(HarnessError::Config("no input texts".into()));
    }
    let backend = match &cfg.llm {
        LlmMode::Script(path) => Backend::Script(ScriptBook::load(path)?),
        LlmMode::Endpoint { url, model } => {
            probe_endpoint(url).map_err(HarnessError::Backend)?;
            Backend::Http(HttpLlm::new(url, model).with_api_key(cfg.llm_api_key.clone()))
        }
    };
    fs::create_dir_all(&cfg.out_dir).map_err(|source| HarnessError::Io {
        path: cfg.out_dir.clone(),
        source,
    })?;

    let mut written = Vec::new();
    let mut failures = Vec::new();
    for input in &cfg.inputs {
        let talk_id = talk_id_for(input);
        match extract_one(cfg, &backend, input, &talk_id) {
            Ok(path) => {
                written.push(path.display().to_string());
            }
            Err(error) => failures.push(ExtractionFailure { talk_id, error }),
        }
    }

    let summary = ExtractionSummary { written, failures };
    let summary_path = cfg.out_dir.join("extraction_summary.json");
    fs::write(
        &summary_path,
        serde_json::to_string_pretty(&summary).expect("summary serialization"),
    )
    .map_err(|source| HarnessError::Io {
        path: summary_path,
        source,
    })?;
    Ok(summary)
}

fn talk_id_for(input: &Path) -> String {
    input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "talk".into())
}

fn extract_one(
    cfg: &ExtractionConfig,
    backend: &Backend,
    input: &Path,
    talk_id: &str,
) -> Result<PathBuf, String> {
    let text = fs::read_to_string(input).map_err(|e| format!("reading {}: {e}", input.display()))?;
    let prompt = build_extraction_prompt(&text).map_err(|e| e.to_string())?;
    let scripted;
    let llm: &dyn LlmBackend = match backend {
        Backend::Script(book) => {
            scripted = book.scripted_for(talk_id).map_err(|e| e.to_string())?;
            &scripted
        }
        Backend::Http(client) => client,
    };
    let mut last_error = String::new();
    for _attempt in 0..=cfg.retries {
        let response = match complete_raw(llm, &prompt, "", MAX_EXTRACTION_TOKENS) {
            Ok(suffix) => suffix.text,
            Err(e) => {
                last_error = e.to_string();
                continue;
            }
        };
        match parse_extraction_response(&response) {
            Ok(info) => {
                let path = cfg.out_dir.join(format!("{talk_id}.json"));
                let doc = serde_json::to_string_pretty(&info).expect("document serialization");
                fs::write(&path, doc).map_err(|e| format!("writing {}: {e}", path.display()))?;
                return Ok(path);
            }
            Err(e) => last_error = e.to_string(),
        }
    }
    Err(format!(
        "no parseable document after {} attempt(s): {last_error}",
        cfg.retries + 1
    ))
}
