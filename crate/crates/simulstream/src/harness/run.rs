//! One evaluation run: a session per manifest entry, records streamed to a
//! JSONL log as they complete (in manifest order), then metric aggregation.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::mpsc;

use rayon::prelude::*;

use crate::asr::{AsrBackend, AudioTimeline, FixtureAsr};
use crate::datasets::{load_manifest, Manifest, ManifestEntry};
use crate::llm::LlmBackend;
use crate::metrics::{aggregate_report, MetricReport};
use crate::policy::{Session, TranslationRecord};
use crate::remote::{probe_endpoint, HttpAsr, HttpLlm};

use super::{AsrMode, HarnessError, LlmMode, RunConfig, ScriptBook};

#[derive(Debug)]
pub struct RunSummary {
    /// All records in manifest order, including resumed ones.
    pub records: Vec<TranslationRecord>,
    /// Sentence-level failures as (id, error).
    pub failures: Vec<(String, String)>,
    pub report: Option<MetricReport>,
    pub records_path: PathBuf,
}

enum AsrHandle {
    Fixture(FixtureAsr),
    Http(HttpAsr),
}

impl AsrHandle {
    fn backend(&self) -> &dyn AsrBackend {
        match self {
            AsrHandle::Fixture(b) => b,
            AsrHandle::Http(b) => b,
        }
    }
}

enum LlmFactory {
    Script(ScriptBook),
    Http(HttpLlm),
}

/// Run every pending manifest entry and write records, report and a CSV row
/// under the configured output directory. Per-sentence failures do not
/// abort the run; they are collected in the summary.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunSummary, HarnessError> {
    cfg.validate()?;
    let manifest = load_manifest(&cfg.manifest_path)?;
    fs::create_dir_all(&cfg.out_dir).map_err(|source| HarnessError::Io {
        path: cfg.out_dir.clone(),
        source,
    })?;
    let records_path = cfg.out_dir.join("records.jsonl");

    let mut completed: HashMap<String, TranslationRecord> = HashMap::new();
    if records_path.exists() {
        if !cfg.resume {
            return Err(HarnessError::Config(format!(
                "{} already exists; pass --resume to continue or choose a fresh output directory",
                records_path.display()
            )));
        }
        for record in read_records(&records_path)? {
            completed.insert(record.sentence_id.clone(), record);
        }
    }

    let pending: Vec<(usize, &ManifestEntry)> = manifest
        .entries
        .iter()
        .enumerate()
        .filter(|(_, e)| !completed.contains_key(&e.id))
        .collect();

    // Fail fast on unreachable backends and uncovered scripts before any
    // session starts.
    let asr = match &cfg.asr {
        AsrMode::Fixture => AsrHandle::Fixture(FixtureAsr),
        AsrMode::Endpoint { url, model } => {
            probe_endpoint(url).map_err(HarnessError::Backend)?;
            AsrHandle::Http(HttpAsr::new(url, model).with_api_key(cfg.asr_api_key.clone()))
        }
    };
    let llm = match &cfg.llm {
        LlmMode::Script(path) => {
            let book = ScriptBook::load(path)?;
            book.ensure_covered(pending.iter().map(|(_, e)| e.id.as_str()))?;
            LlmFactory::Script(book)
        }
        LlmMode::Endpoint { url, model } => {
            probe_endpoint(url).map_err(HarnessError::Backend)?;
            LlmFactory::Http(
                HttpLlm::new(url, model)
                    .with_api_key(cfg.llm_api_key.clone())
                    .with_stop(vec![cfg.session.template.turn_end.clone()]),
            )
        }
    };

    let prompts_dir = if cfg.dump_prompts {
        let dir = cfg.out_dir.join("prompts");
        fs::create_dir_all(&dir).map_err(|source| HarnessError::Io {
            path: dir.clone(),
            source,
        })?;
        Some(dir)
    } else {
        None
    };

    let file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&records_path)
        .map_err(|source| HarnessError::Io {
            path: records_path.clone(),
            source,
        })?;

    // Writer applies a reorder buffer so the log is always in manifest
    // order, no matter which session finishes first.
    let expected: VecDeque<usize> = pending.iter().map(|(i, _)| *i).collect();
    let (tx, rx) = mpsc::channel::<(usize, Result<TranslationRecord, String>)>();
    let writer = std::thread::spawn(move || -> std::io::Result<Vec<ResultEntry>> {
        let mut file = std::io::BufWriter::new(file);
        let mut expected = expected;
        let mut buffered: BTreeMap<usize, Result<TranslationRecord, String>> = BTreeMap::new();
        let mut results = Vec::new();
        for (idx, outcome) in rx {
            buffered.insert(idx, outcome);
            while let (Some(&next), Some(entry)) =
                (expected.front(), buffered.first_entry().map(|e| *e.key()))
            {
                if entry != next {
                    break;
                }
                expected.pop_front();
                let outcome = buffered.remove(&next).unwrap();
                if let Ok(record) = &outcome {
                    serde_json::to_writer(&mut file, record)?;
                    file.write_all(b"\n")?;
                    file.flush()?;
                }
                results.push((next, outcome));
            }
        }
        Ok(results)
    });

    if cfg.session.context_carryover {
        run_sequential_with_context(cfg, &manifest, &completed, &pending, &asr, &llm, prompts_dir.as_deref(), &tx);
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.effective_parallelism())
            .build()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        pool.install(|| {
            pending.par_iter().for_each_with(tx.clone(), |tx, (idx, entry)| {
                let outcome = run_entry(cfg, &manifest, entry, &asr, &llm, None, prompts_dir.as_deref());
                let _ = tx.send((*idx, outcome));
            });
        });
    }
    drop(tx);
    let results = writer
        .join()
        .expect("record writer panicked")
        .map_err(|source| HarnessError::Io {
            path: records_path.clone(),
            source,
        })?;

    let mut new_records: HashMap<String, TranslationRecord> = HashMap::new();
    let mut failures = Vec::new();
    for (idx, outcome) in results {
        let id = manifest.entries[idx].id.clone();
        match outcome {
            Ok(record) => {
                new_records.insert(id, record);
            }
            Err(message) => failures.push((id, message)),
        }
    }

    let records: Vec<TranslationRecord> = manifest
        .entries
        .iter()
        .filter_map(|e| completed.get(&e.id).or_else(|| new_records.get(&e.id)))
        .cloned()
        .collect();

    let report = if records.is_empty() {
        None
    } else {
        match aggregate_report(&records, cfg.is_live()) {
            Ok(report) => {
                write_report_files(cfg, &report)?;
                Some(report)
            }
            Err(e) => {
                failures.push(("(report)".into(), e.to_string()));
                None
            }
        }
    };

    Ok(RunSummary {
        records,
        failures,
        report,
        records_path,
    })
}

type ResultEntry = (usize, Result<TranslationRecord, String>);

#[allow(clippy::too_many_arguments)]
fn run_sequential_with_context(
    cfg: &RunConfig,
    manifest: &Manifest,
    completed: &HashMap<String, TranslationRecord>,
    pending: &[(usize, &ManifestEntry)],
    asr: &AsrHandle,
    llm: &LlmFactory,
    prompts_dir: Option<&Path>,
    tx: &mpsc::Sender<ResultEntry>,
) {
    let pending_ids: std::collections::HashSet<usize> = pending.iter().map(|(i, _)| *i).collect();
    let mut talk_context: HashMap<String, (Vec<String>, Vec<String>)> = HashMap::new();
    for (idx, entry) in manifest.entries.iter().enumerate() {
        let context = entry
            .talk_id
            .as_ref()
            .and_then(|t| talk_context.get(t))
            .cloned();
        let hypothesis = if pending_ids.contains(&idx) {
            let outcome = run_entry(cfg, manifest, entry, asr, llm, context, prompts_dir);
            let hyp = outcome.as_ref().ok().map(|r| r.hypothesis.clone());
            let _ = tx.send((idx, outcome));
            hyp
        } else {
            completed.get(&entry.id).map(|r| r.hypothesis.clone())
        };
        if let (Some(hyp), Some(talk)) = (hypothesis, &entry.talk_id) {
            let slot = talk_context.entry(talk.clone()).or_default();
            slot.0.extend(entry_source_words(manifest, entry));
            slot.1.extend(hyp.split_whitespace().map(str::to_string));
        }
    }
}

/// Source words for cross-sentence context: the transcript text when the
/// manifest carries it, otherwise the fixture's surface words.
fn entry_source_words(manifest: &Manifest, entry: &ManifestEntry) -> Vec<String> {
    if let Some(text) = &entry.source_text {
        return text.split_whitespace().map(str::to_string).collect();
    }
    manifest
        .entry_timeline(entry)
        .ok()
        .and_then(|t: AudioTimeline| {
            t.fixture_words()
                .map(|ws| ws.iter().map(|w| w.surface().to_string()).collect())
        })
        .unwrap_or_default()
}

fn run_entry(
    cfg: &RunConfig,
    manifest: &Manifest,
    entry: &ManifestEntry,
    asr: &AsrHandle,
    llm: &LlmFactory,
    context: Option<(Vec<String>, Vec<String>)>,
    prompts_dir: Option<&Path>,
) -> Result<TranslationRecord, String> {
    let timeline = manifest.entry_timeline(entry).map_err(|e| e.to_string())?;
    match llm {
        LlmFactory::Script(book) => {
            let scripted = book.scripted_for(&entry.id).map_err(|e| e.to_string())?;
            run_session_for(cfg, manifest, entry, timeline, asr.backend(), &scripted, context, prompts_dir)
        }
        LlmFactory::Http(client) => {
            run_session_for(cfg, manifest, entry, timeline, asr.backend(), client, context, prompts_dir)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_session_for(
    cfg: &RunConfig,
    manifest: &Manifest,
    entry: &ManifestEntry,
    timeline: AudioTimeline,
    asr: &dyn AsrBackend,
    llm: &dyn LlmBackend,
    context: Option<(Vec<String>, Vec<String>)>,
    prompts_dir: Option<&Path>,
) -> Result<TranslationRecord, String> {
    let background = manifest.entry_background(entry).cloned();
    let mut session = Session::new(&cfg.session, timeline, asr, llm, background)
        .map_err(|e| e.to_string())?;
    if let Some((source, target)) = context {
        session = session.with_context(source, target);
    }
    if prompts_dir.is_some() {
        session.enable_prompt_dump();
    }
    let record = session.run(&entry.id, &entry.reference).map_err(|e| e.to_string())?;
    if let Some(dir) = prompts_dir {
        let mut dump = String::new();
        for (i, prompt) in session.dumped_prompts().unwrap_or(&[]).iter().enumerate() {
            dump.push_str(&format!("=== prompt {} ===\n{prompt}\n", i + 1));
        }
        let path = dir.join(format!("{}.txt", entry.id));
        fs::write(&path, dump).map_err(|e| format!("writing {}: {e}", path.display()))?;
    }
    Ok(record)
}

fn write_report_files(cfg: &RunConfig, report: &MetricReport) -> Result<(), HarnessError> {
    let report_path = cfg.out_dir.join("report.json");
    let json = serde_json::to_string_pretty(report).expect("report serialization");
    fs::write(&report_path, json).map_err(|source| HarnessError::Io {
        path: report_path,
        source,
    })?;
    let csv_path = cfg.out_dir.join("metrics.csv");
    let csv = format!(
        "{}\n{}\n",
        csv_header(),
        csv_row(report, cfg.session.min_read_time_ms)
    );
    fs::write(&csv_path, csv).map_err(|source| HarnessError::Io {
        path: csv_path,
        source,
    })?;
    Ok(())
}

pub(super) fn csv_header() -> &'static str {
    "config,min_read_time_ms,bleu,al_ms,laal_ms,wer,rtf"
}

pub(super) fn csv_row(report: &MetricReport, min_read_time_ms: u64) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        report.config_fingerprint,
        min_read_time_ms,
        report.bleu,
        report.al_ms,
        report.laal_ms,
        report.wer,
        report.rtf.map(|r| r.to_string()).unwrap_or_default()
    )
}

/// Strict record-log reader: any malformed line aborts with its number.
pub fn read_records(path: &Path) -> Result<Vec<TranslationRecord>, HarnessError> {
    let text = fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: TranslationRecord =
            serde_json::from_str(line).map_err(|e| HarnessError::MalformedRecord {
                path: path.to_path_buf(),
                line: idx + 1,
                message: e.to_string(),
            })?;
        records.push(record);
    }
    Ok(records)
}
