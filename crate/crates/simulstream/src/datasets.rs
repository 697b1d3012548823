//! Manifest-driven ingestion of evaluation sets.
//!
//! A manifest is a JSONL file, one sentence per line. Each entry points at
//! either a timed-transcript fixture (simulated mode) or a waveform (live
//! mode), carries the reference translation, and may reference a per-talk
//! background document by id. Background documents live next to the
//! manifest in a `backgrounds/` directory as `<background_id>.json` and are
//! resolved and parsed eagerly at load time. Background granularity is
//! per-talk: sentences link to talks via `talk_id`, talks to documents via
//! `background_id`.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asr::{AsrError, AudioTimeline, TimedWord};
use crate::prompt::{load_background, BackgroundInfo, PromptError};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("manifest validation failed: {0}")]
    Validation(String),
    #[error("audio format error on {path}: {message}")]
    AudioFormat { path: PathBuf, message: String },
    #[error(transparent)]
    Timeline(#[from] AsrError),
    #[error("background document {id}: {source}")]
    Background {
        id: String,
        #[source]
        source: PromptError,
    },
}

/// One evaluation sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture_path: Option<PathBuf>,
    pub reference: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub talk_id: Option<String>,
}

/// A validated manifest with its background documents resolved.
#[derive(Debug, Clone)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    backgrounds: HashMap<String, BackgroundInfo>,
    base_dir: PathBuf,
}

impl Manifest {
    pub fn background(&self, id: &str) -> Option<&BackgroundInfo> {
        self.backgrounds.get(id)
    }

    pub fn entry_background(&self, entry: &ManifestEntry) -> Option<&BackgroundInfo> {
        entry
            .background_id
            .as_deref()
            .and_then(|id| self.background(id))
    }

    /// Load the entry's timeline, resolving relative paths against the
    /// manifest location.
    pub fn entry_timeline(&self, entry: &ManifestEntry) -> Result<AudioTimeline, DatasetError> {
        match (&entry.fixture_path, &entry.audio_path) {
            (Some(fixture), None) => load_timed_transcript(&self.resolve(fixture)),
            (None, Some(audio)) => read_audio(&self.resolve(audio)),
            _ => Err(DatasetError::Validation(format!(
                "entry {} must set exactly one of fixture_path/audio_path",
                entry.id
            ))),
        }
    }

    fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Re-emit the manifest as JSONL, line per entry.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for entry in &self.entries {
            out.push_str(&serde_json::to_string(entry).expect("manifest entries serialize"));
            out.push('\n');
        }
        out
    }
}

/// Load and validate a JSONL manifest, resolving background documents
/// eagerly from `<manifest dir>/backgrounds/<id>.json`.
pub fn load_manifest(path: &Path) -> Result<Manifest, DatasetError> {
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut entries = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestEntry =
            serde_json::from_str(line).map_err(|e| DatasetError::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                message: e.to_string(),
            })?;
        entries.push(entry);
    }

    let mut seen = HashSet::new();
    for entry in &entries {
        if !seen.insert(entry.id.as_str()) {
            return Err(DatasetError::Validation(format!(
                "duplicate entry id {:?}",
                entry.id
            )));
        }
        if entry.fixture_path.is_some() == entry.audio_path.is_some() {
            return Err(DatasetError::Validation(format!(
                "entry {} must set exactly one of fixture_path/audio_path",
                entry.id
            )));
        }
    }

    let mut backgrounds = HashMap::new();
    let mut dangling = Vec::new();
    for id in entries
        .iter()
        .filter_map(|e| e.background_id.as_deref())
        .collect::<HashSet<_>>()
    {
        let doc_path = base_dir.join("backgrounds").join(format!("{id}.json"));
        match fs::read_to_string(&doc_path) {
            Ok(doc) => {
                let info = load_background(&doc).map_err(|source| DatasetError::Background {
                    id: id.to_string(),
                    source,
                })?;
                backgrounds.insert(id.to_string(), info);
            }
            Err(_) => dangling.push(id.to_string()),
        }
    }
    if !dangling.is_empty() {
        dangling.sort();
        return Err(DatasetError::Validation(format!(
            "dangling background ids (no document under {}): {}",
            base_dir.join("backgrounds").display(),
            dangling.join(", ")
        )));
    }

    Ok(Manifest {
        entries,
        backgrounds,
        base_dir,
    })
}

/// Load a timed-transcript fixture: JSONL of `{word, end_ms,
/// surface_override?}` with non-decreasing end times. The total duration is
/// the last end time.
pub fn load_timed_transcript(path: &Path) -> Result<AudioTimeline, DatasetError> {
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut words = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let word: TimedWord = serde_json::from_str(line).map_err(|e| DatasetError::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        words.push(word);
    }
    Ok(AudioTimeline::from_fixture(words)?)
}

/// Load a 16 kHz, 16-bit, mono waveform. Anything else is rejected; there
/// is no silent resampling.
pub fn read_audio(path: &Path) -> Result<AudioTimeline, DatasetError> {
    let reader = hound::WavReader::open(path).map_err(|e| DatasetError::AudioFormat {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let spec = reader.spec();
    if spec.channels != 1
        || spec.sample_rate != 16_000
        || spec.bits_per_sample != 16
        || spec.sample_format != hound::SampleFormat::Int
    {
        return Err(DatasetError::AudioFormat {
            path: path.to_path_buf(),
            message: format!(
                "expected 16 kHz 16-bit mono PCM, got {} Hz {}-bit {} channel(s) {:?}",
                spec.sample_rate, spec.bits_per_sample, spec.channels, spec.sample_format
            ),
        });
    }
    let samples: Vec<i16> = reader
        .into_samples::<i16>()
        .collect::<Result<_, _>>()
        .map_err(|e| DatasetError::AudioFormat {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    Ok(AudioTimeline::from_samples(samples, 16_000)?)
}
