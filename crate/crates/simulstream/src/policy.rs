//! The policy-free READ/WRITE session loop.
//!
//! There is no separate segmentation policy: the generator itself decides
//! when to wait by what it emits. After every prompt the backend either
//! completes one full target word (a WRITE — the word is appended to the
//! partial translation) or ends its turn (a READ — one more recognized
//! source word is revealed to the prompt). WRITEs are gated until a minimum
//! amount of source audio has been heard, which is the latency-control knob.
//! Once the source is fully revealed the remaining translation is generated
//! in one final run to the end-of-turn marker.
//!
//! Conditioning is carried entirely by the rendered prompt; the only state
//! crossing steps besides the prompt is the carried-over token fragment.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::asr::{AsrBackend, AsrError, AudioTimeline, TranscriptState};
use crate::llm::{
    complete_to_end, complete_word, LlmBackend, LlmError, WordCompletion, WordOutcome,
};
use crate::metrics::BLEU_TOKENIZATION;
use crate::prompt::{
    render_prompt, system_message, BackgroundInfo, ChatTemplate, PromptError, PromptSpec,
};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Asr(#[from] AsrError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("session already finished")]
    Finished,
}

/// Knobs for one translation session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub src_lang: String,
    pub tgt_lang: String,
    /// Minimum elapsed source audio before any WRITE is permitted.
    pub min_read_time_ms: u64,
    pub chunk_duration_ms: u64,
    pub priming_enabled: bool,
    pub background_enabled: bool,
    /// Fragment budget per word completion.
    pub max_word_tokens: usize,
    /// Fragment budget for the final run to end of turn.
    pub max_final_tokens: usize,
    /// When true, delays also account for generation wall time
    /// (`max(elapsed audio, elapsed wall clock)`); delays may then exceed the
    /// source duration and runs are no longer reproducible. Default is
    /// computation-unaware: delays are elapsed source audio only, and wall
    /// time is tracked separately for RTF.
    pub computation_aware: bool,
    /// Prepend earlier sentences of the same talk to the prompt context.
    pub context_carryover: bool,
    pub template: ChatTemplate,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            src_lang: "English".into(),
            tgt_lang: "German".into(),
            min_read_time_ms: 1200,
            chunk_duration_ms: 200,
            priming_enabled: true,
            background_enabled: true,
            max_word_tokens: crate::llm::DEFAULT_MAX_WORD_TOKENS,
            max_final_tokens: crate::llm::DEFAULT_MAX_FINAL_TOKENS,
            computation_aware: false,
            context_carryover: false,
            template: ChatTemplate::default(),
        }
    }
}

impl SessionConfig {
    /// Stable digest of every knob that affects results, including the
    /// pinned scoring conventions, so reports are never compared across
    /// incompatible setups.
    pub fn fingerprint(&self) -> String {
        let payload = serde_json::json!({
            "config": self,
            "bleu_tokenization": BLEU_TOKENIZATION,
        });
        let digest = Sha256::digest(payload.to_string().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// One event of a session trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "UPPERCASE")]
pub enum Action {
    /// One more source word was revealed to the prompt.
    Read { at_source_ms: u64 },
    /// One target word was emitted.
    Write { word: String, at_source_ms: u64 },
}

impl Action {
    pub fn at_source_ms(&self) -> u64 {
        match self {
            Action::Read { at_source_ms } | Action::Write { at_source_ms, .. } => *at_source_ms,
        }
    }

    pub fn is_write(&self) -> bool {
        matches!(self, Action::Write { .. })
    }
}

/// Per-sentence result: hypothesis, timing and the complete action history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationRecord {
    pub sentence_id: String,
    pub hypothesis: String,
    pub reference: String,
    /// Elapsed source audio (ms) when each hypothesis word was emitted;
    /// finalization words carry the full source duration.
    pub delays: Vec<u64>,
    pub trace: Vec<Action>,
    pub wall_time_ms: u64,
    pub source_duration_ms: u64,
    pub config_fingerprint: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepOutcome {
    Acted(Action),
    /// The source is exhausted (or the gate can never open on it); the
    /// session should run the final completion.
    Finalize,
}

/// One in-flight translation session. Sessions share backends but never
/// state; one session is one logical thread of control.
pub struct Session<'a> {
    cfg: &'a SessionConfig,
    timeline: AudioTimeline,
    asr: &'a dyn AsrBackend,
    llm: &'a dyn LlmBackend,
    background: Option<BackgroundInfo>,
    base_system_message: String,
    transcript: TranscriptState,
    partial_source: Vec<String>,
    partial_target: Vec<String>,
    source_context: Vec<String>,
    target_context: Vec<String>,
    carry: String,
    trace: Vec<Action>,
    delays: Vec<u64>,
    warnings: Vec<String>,
    prompt_dump: Option<Vec<String>>,
    started: Instant,
    finished: bool,
}

impl<'a> Session<'a> {
    pub fn new(
        cfg: &'a SessionConfig,
        timeline: AudioTimeline,
        asr: &'a dyn AsrBackend,
        llm: &'a dyn LlmBackend,
        background: Option<BackgroundInfo>,
    ) -> Result<Self, SessionError> {
        let timeline = timeline.with_chunk_duration(cfg.chunk_duration_ms)?;
        let background = if cfg.background_enabled { background } else { None };
        let base_system_message =
            system_message(&cfg.src_lang, &cfg.tgt_lang, background.as_ref());
        Ok(Self {
            cfg,
            timeline,
            asr,
            llm,
            background,
            base_system_message,
            transcript: TranscriptState::new(),
            partial_source: Vec::new(),
            partial_target: Vec::new(),
            source_context: Vec::new(),
            target_context: Vec::new(),
            carry: String::new(),
            trace: Vec::new(),
            delays: Vec::new(),
            warnings: Vec::new(),
            prompt_dump: None,
            started: Instant::now(),
            finished: false,
        })
    }

    /// Seed the prompt with earlier sentences of the same talk. Context
    /// words are rendered into the prompt but are not part of this
    /// sentence's hypothesis, delays or trace.
    pub fn with_context(mut self, source: Vec<String>, target: Vec<String>) -> Self {
        self.source_context = source;
        self.target_context = target;
        self
    }

    /// Record every rendered prompt, for ablation diffing.
    pub fn enable_prompt_dump(&mut self) {
        self.prompt_dump = Some(Vec::new());
    }

    pub fn dumped_prompts(&self) -> Option<&[String]> {
        self.prompt_dump.as_deref()
    }

    pub fn trace(&self) -> &[Action] {
        &self.trace
    }

    fn render_current_prompt(&mut self) -> Result<String, PromptError> {
        let mut source = self.source_context.clone();
        source.extend(self.partial_source.iter().cloned());
        let mut target = self.target_context.clone();
        target.extend(self.partial_target.iter().cloned());
        let spec = PromptSpec {
            src_lang: self.cfg.src_lang.clone(),
            tgt_lang: self.cfg.tgt_lang.clone(),
            system_message: self.base_system_message.clone(),
            background: self.background.clone(),
            partial_source: source,
            partial_target: target,
            priming_enabled: self.cfg.priming_enabled,
        };
        let rendered = render_prompt(&spec, &self.cfg.template)?;
        if let Some(dump) = &mut self.prompt_dump {
            dump.push(rendered.clone());
        }
        Ok(rendered)
    }

    fn delay_at(&self, audio_ms: u64) -> u64 {
        if self.cfg.computation_aware {
            audio_ms.max(self.started.elapsed().as_millis() as u64)
        } else {
            audio_ms
        }
    }

    /// Reveal one more source word, ingesting chunks first if the buffer is
    /// empty. `None` means there is nothing left to reveal.
    fn read(&mut self) -> Result<Option<Action>, SessionError> {
        while self.transcript.pending_len() == 0 && !self.transcript.audio_finished() {
            self.transcript.ingest_chunk(&self.timeline, self.asr)?;
        }
        match self.transcript.drain_word() {
            Some(recognized) => {
                self.partial_source.push(recognized.word);
                let action = Action::Read {
                    at_source_ms: self.transcript.audio_cursor_ms(),
                };
                self.trace.push(action.clone());
                Ok(Some(action))
            }
            None => Ok(None),
        }
    }

    /// Perform one READ or WRITE. While the elapsed audio is below the
    /// minimum read time the backend is not consulted at all. Transient
    /// backend errors propagate with the session left resumable.
    pub fn step(&mut self) -> Result<StepOutcome, SessionError> {
        if self.finished {
            return Err(SessionError::Finished);
        }
        let gate_open = self.transcript.audio_cursor_ms() >= self.cfg.min_read_time_ms;
        // The prompt needs at least one source word, so the very first
        // action is always a READ even if the gate is already open.
        if !gate_open || self.prompt_source_empty() {
            if self.transcript.fully_drained() {
                return Ok(StepOutcome::Finalize);
            }
            return Ok(match self.read()? {
                Some(action) => StepOutcome::Acted(action),
                None => StepOutcome::Finalize,
            });
        }
        let prompt = self.render_current_prompt()?;
        let completion =
            match complete_word(self.llm, &prompt, &self.carry, self.cfg.max_word_tokens) {
                Ok(completion) => completion,
                Err(LlmError::WordOverflow { carry }) => {
                    self.warnings
                        .push("word completion exhausted its fragment budget".into());
                    WordCompletion {
                        outcome: WordOutcome::EndOfTurn,
                        carry,
                    }
                }
                Err(other) => return Err(other.into()),
            };
        self.carry = completion.carry;
        match completion.outcome {
            WordOutcome::Word(word) => {
                let at_source_ms = self.transcript.audio_cursor_ms();
                self.partial_target.push(word.clone());
                self.delays.push(self.delay_at(at_source_ms));
                let action = Action::Write { word, at_source_ms };
                self.trace.push(action.clone());
                Ok(StepOutcome::Acted(action))
            }
            WordOutcome::EndOfTurn => {
                if self.transcript.fully_drained() {
                    return Ok(StepOutcome::Finalize);
                }
                Ok(match self.read()? {
                    Some(action) => StepOutcome::Acted(action),
                    None => StepOutcome::Finalize,
                })
            }
        }
    }

    fn prompt_source_empty(&self) -> bool {
        self.source_context.is_empty() && self.partial_source.is_empty()
    }

    fn hypothesis_overflowed(&self) -> bool {
        self.partial_target.len() > 2 * self.partial_source.len() + 20
    }

    /// Drive the session to completion and assemble the record.
    pub fn run(
        &mut self,
        sentence_id: impl Into<String>,
        reference: impl Into<String>,
    ) -> Result<TranslationRecord, SessionError> {
        self.started = Instant::now();
        let mut truncated = false;
        while !self.transcript.fully_drained() {
            match self.step()? {
                StepOutcome::Finalize => break,
                StepOutcome::Acted(_) => {}
            }
            if self.hypothesis_overflowed() {
                self.warnings
                    .push("hypothesis exceeded the overflow guard; output truncated".into());
                truncated = true;
                break;
            }
        }
        if !truncated && !self.prompt_source_empty() {
            let prompt = self.render_current_prompt()?;
            let suffix =
                complete_to_end(self.llm, &prompt, &self.carry, self.cfg.max_final_tokens)?;
            if suffix.truncated {
                self.warnings
                    .push("final completion exhausted its fragment budget".into());
            }
            let final_delay = self.delay_at(self.timeline.total_duration_ms());
            for word in suffix.text.split_whitespace() {
                self.partial_target.push(word.to_string());
                self.delays.push(final_delay);
            }
            self.carry.clear();
        }
        self.finished = true;
        Ok(TranslationRecord {
            sentence_id: sentence_id.into(),
            hypothesis: self.partial_target.join(" "),
            reference: reference.into(),
            delays: self.delays.clone(),
            trace: self.trace.clone(),
            wall_time_ms: self.started.elapsed().as_millis() as u64,
            source_duration_ms: self.timeline.total_duration_ms(),
            config_fingerprint: self.cfg.fingerprint(),
            warnings: self.warnings.clone(),
        })
    }
}

/// Convenience wrapper: build a session and run it to a record.
pub fn run_session(
    timeline: AudioTimeline,
    reference: &str,
    background: Option<BackgroundInfo>,
    cfg: &SessionConfig,
    asr: &dyn AsrBackend,
    llm: &dyn LlmBackend,
    sentence_id: &str,
) -> Result<TranslationRecord, SessionError> {
    Session::new(cfg, timeline, asr, llm, background)?.run(sentence_id, reference)
}
