//! Incremental speech recognition over a chunked audio timeline.
//!
//! Audio is consumed in fixed-size chunks (200 ms by default). After every
//! chunk the *entire* prefix read so far is re-transcribed, and the last
//! word of the raw transcription is discarded unless the prefix already
//! covers the whole timeline — the tail word is unstable while more audio is
//! still coming. Words that survive the discard are reconciled against the
//! words already committed to the translation prompt: committed words are
//! immutable, so re-transcription can only replace the uncommitted tail.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default chunk length added per ingest.
pub const DEFAULT_CHUNK_MS: u64 = 200;

#[derive(Debug, Error)]
pub enum AsrError {
    /// Backend failure; safe to retry the same call.
    #[error("transient ASR backend error: {0}")]
    Transient(String),
    /// The new transcription is shorter than the committed prefix, so it
    /// cannot extend it. State is left unchanged.
    #[error("transcription of {got} words is shorter than {committed} committed words")]
    Reconciliation { got: usize, committed: usize },
    #[error("audio already finished; no chunks remain to ingest")]
    AlreadyFinished,
    #[error("cannot finalize: {remaining_ms} ms of audio not yet ingested")]
    NotFullyIngested { remaining_ms: u64 },
    #[error("invalid timeline: {0}")]
    InvalidTimeline(String),
    #[error("backend does not support this timeline source: {0}")]
    UnsupportedSource(String),
}

/// One fixture word with the time its audio ends. `surface_override`, when
/// set, is what the recognizer "hears" instead of `word` — the hook for
/// injecting recognition errors into simulated runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimedWord {
    pub word: String,
    pub end_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface_override: Option<String>,
}

impl TimedWord {
    pub fn new(word: impl Into<String>, end_ms: u64) -> Self {
        Self {
            word: word.into(),
            end_ms,
            surface_override: None,
        }
    }

    /// The surface form the recognizer emits for this word.
    pub fn surface(&self) -> &str {
        self.surface_override.as_deref().unwrap_or(&self.word)
    }
}

#[derive(Debug, Clone)]
pub enum TimelineSource {
    /// Timed-transcript fixture for simulated, deterministic runs.
    Fixture(Vec<TimedWord>),
    /// Raw audio for live transcription backends.
    Samples { samples: Vec<i16>, sample_rate: u32 },
}

/// A source audio timeline consumed left to right in fixed chunks.
#[derive(Debug, Clone)]
pub struct AudioTimeline {
    source: TimelineSource,
    total_duration_ms: u64,
    chunk_duration_ms: u64,
}

impl AudioTimeline {
    /// Build a simulated timeline from timed words. End times must be
    /// non-decreasing; the total duration is the last word's end time.
    pub fn from_fixture(words: Vec<TimedWord>) -> Result<Self, AsrError> {
        for pair in words.windows(2) {
            if pair[1].end_ms < pair[0].end_ms {
                return Err(AsrError::InvalidTimeline(format!(
                    "non-monotone end times: {} ms after {} ms",
                    pair[1].end_ms, pair[0].end_ms
                )));
            }
        }
        let total = words.last().map(|w| w.end_ms).unwrap_or(0);
        Ok(Self {
            source: TimelineSource::Fixture(words),
            total_duration_ms: total,
            chunk_duration_ms: DEFAULT_CHUNK_MS,
        })
    }

    /// Build a live timeline from PCM samples.
    pub fn from_samples(samples: Vec<i16>, sample_rate: u32) -> Result<Self, AsrError> {
        if sample_rate == 0 {
            return Err(AsrError::InvalidTimeline("zero sample rate".into()));
        }
        let total = (samples.len() as u64 * 1000) / sample_rate as u64;
        Ok(Self {
            source: TimelineSource::Samples {
                samples,
                sample_rate,
            },
            total_duration_ms: total,
            chunk_duration_ms: DEFAULT_CHUNK_MS,
        })
    }

    pub fn with_chunk_duration(mut self, chunk_ms: u64) -> Result<Self, AsrError> {
        if chunk_ms == 0 {
            return Err(AsrError::InvalidTimeline("chunk duration must be > 0".into()));
        }
        self.chunk_duration_ms = chunk_ms;
        Ok(self)
    }

    pub fn total_duration_ms(&self) -> u64 {
        self.total_duration_ms
    }

    pub fn chunk_duration_ms(&self) -> u64 {
        self.chunk_duration_ms
    }

    pub fn source(&self) -> &TimelineSource {
        &self.source
    }

    pub fn fixture_words(&self) -> Option<&[TimedWord]> {
        match &self.source {
            TimelineSource::Fixture(words) => Some(words),
            TimelineSource::Samples { .. } => None,
        }
    }

    /// PCM samples covering `[0, upto_ms)`, for live backends.
    pub fn sample_prefix(&self, upto_ms: u64) -> Option<(&[i16], u32)> {
        match &self.source {
            TimelineSource::Fixture(_) => None,
            TimelineSource::Samples {
                samples,
                sample_rate,
            } => {
                let n = ((upto_ms as u128 * *sample_rate as u128) / 1000) as usize;
                Some((&samples[..n.min(samples.len())], *sample_rate))
            }
        }
    }
}

/// Transcribes a growing audio prefix. Implementations must be deterministic
/// for identical prefixes (required of mocks, best effort for live services)
/// and tolerate concurrent sessions on distinct transcript states.
pub trait AsrBackend: Send + Sync {
    /// Transcribe the prefix `[0, upto_ms)` of the timeline into words.
    fn transcribe_prefix(&self, timeline: &AudioTimeline, upto_ms: u64)
        -> Result<Vec<String>, AsrError>;
}

/// Simulated recognizer: a fixture word is heard once the prefix covers its
/// end time. Pure function of the fixture, hence deterministic.
#[derive(Debug, Default, Clone, Copy)]
pub struct FixtureAsr;

impl AsrBackend for FixtureAsr {
    fn transcribe_prefix(
        &self,
        timeline: &AudioTimeline,
        upto_ms: u64,
    ) -> Result<Vec<String>, AsrError> {
        let words = timeline.fixture_words().ok_or_else(|| {
            AsrError::UnsupportedSource("FixtureAsr requires a fixture timeline".into())
        })?;
        Ok(words
            .iter()
            .take_while(|w| w.end_ms <= upto_ms)
            .map(|w| w.surface().to_string())
            .collect())
    }
}

/// A recognized word and the audio-cursor position at which it first became
/// visible downstream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecognizedWord {
    pub word: String,
    pub available_at_ms: u64,
}

/// The evolving recognized-word sequence for one session.
///
/// `committed` words have been handed to the generation prompt and never
/// change. `pending` words are recognized but not yet consumed; they may be
/// replaced wholesale by the next re-transcription.
#[derive(Debug, Clone, Default)]
pub struct TranscriptState {
    committed: Vec<RecognizedWord>,
    pending: VecDeque<RecognizedWord>,
    audio_cursor_ms: u64,
    audio_finished: bool,
}

impl TranscriptState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn committed(&self) -> &[RecognizedWord] {
        &self.committed
    }

    pub fn pending(&self) -> impl Iterator<Item = &RecognizedWord> {
        self.pending.iter()
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn audio_cursor_ms(&self) -> u64 {
        self.audio_cursor_ms
    }

    pub fn audio_finished(&self) -> bool {
        self.audio_finished
    }

    /// True once all audio is ingested and every recognized word drained.
    pub fn fully_drained(&self) -> bool {
        self.audio_finished && self.pending.is_empty()
    }

    /// Advance the cursor by one chunk and re-transcribe the whole prefix.
    ///
    /// The last raw word is dropped unless the prefix now covers the full
    /// timeline, in which case the state is also marked finished. On error
    /// the state is unchanged.
    pub fn ingest_chunk(
        &mut self,
        timeline: &AudioTimeline,
        backend: &dyn AsrBackend,
    ) -> Result<(), AsrError> {
        if self.audio_finished {
            return Err(AsrError::AlreadyFinished);
        }
        let new_cursor =
            (self.audio_cursor_ms + timeline.chunk_duration_ms()).min(timeline.total_duration_ms());
        let covers_all = new_cursor >= timeline.total_duration_ms();
        let mut raw = backend.transcribe_prefix(timeline, new_cursor)?;
        if !covers_all {
            raw.pop();
        }
        let pending = self.reconcile(&raw, new_cursor)?;
        self.pending = pending;
        self.audio_cursor_ms = new_cursor;
        self.audio_finished = covers_all;
        Ok(())
    }

    /// Move the head of the pending buffer into the committed sequence.
    /// Returns `None` when the buffer is empty (caller must ingest more
    /// audio).
    pub fn drain_word(&mut self) -> Option<RecognizedWord> {
        let word = self.pending.pop_front()?;
        self.committed.push(word.clone());
        Some(word)
    }

    /// Terminal transcription of the whole timeline: marks the state
    /// finished and releases the previously discarded tail word, if any.
    /// Idempotent on already-finished states.
    pub fn finalize(
        &mut self,
        timeline: &AudioTimeline,
        backend: &dyn AsrBackend,
    ) -> Result<(), AsrError> {
        if self.audio_finished {
            return Ok(());
        }
        if self.audio_cursor_ms < timeline.total_duration_ms() {
            return Err(AsrError::NotFullyIngested {
                remaining_ms: timeline.total_duration_ms() - self.audio_cursor_ms,
            });
        }
        let raw = backend.transcribe_prefix(timeline, timeline.total_duration_ms())?;
        let pending = self.reconcile(&raw, self.audio_cursor_ms)?;
        self.pending = pending;
        self.audio_finished = true;
        Ok(())
    }

    /// Replace the uncommitted tail with the raw transcription's tail.
    /// Words matching the previous pending prefix keep their original
    /// availability stamp; anything new or changed is stamped `cursor_ms`.
    fn reconcile(
        &self,
        raw: &[String],
        cursor_ms: u64,
    ) -> Result<VecDeque<RecognizedWord>, AsrError> {
        if raw.len() < self.committed.len() {
            return Err(AsrError::Reconciliation {
                got: raw.len(),
                committed: self.committed.len(),
            });
        }
        let tail = &raw[self.committed.len()..];
        let mut pending = VecDeque::with_capacity(tail.len());
        let mut unchanged = true;
        for (i, word) in tail.iter().enumerate() {
            let prev = self.pending.get(i).filter(|p| p.word == *word);
            unchanged = unchanged && prev.is_some();
            pending.push_back(RecognizedWord {
                word: word.clone(),
                available_at_ms: if unchanged {
                    prev.map(|p| p.available_at_ms).unwrap_or(cursor_ms)
                } else {
                    cursor_ms
                },
            });
        }
        Ok(pending)
    }
}
