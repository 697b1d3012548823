//! Streaming simultaneous speech translation.
//!
//! This crate orchestrates a cascaded simultaneous-translation pipeline:
//! incremental speech recognition feeds a word-at-a-time READ/WRITE
//! generation loop against a pluggable completion backend, and the results
//! are scored with the usual latency/quality stack (AL, LAAL, BLEU, WER,
//! RTF).
//!
//! The pieces:
//!
//! - [`asr`] — chunked prefix re-transcription with last-word discarding,
//!   producing a stable stream of recognized words.
//! - [`llm`] — token-level greedy continuation against a scripted mock or a
//!   remote completion endpoint, stopping at a completed word or an
//!   end-of-turn marker.
//! - [`prompt`] — primed chat-prompt rendering (system message with optional
//!   background information, partial source in the user turn, partial target
//!   pre-filling the assistant turn) plus background-document handling.
//! - [`policy`] — the READ/WRITE session loop with a minimum-audio gate and
//!   end-of-input finalization.
//! - [`metrics`] — AL, LAAL, corpus BLEU, WER, RTF and report aggregation.
//! - [`datasets`] — manifest-driven ingestion of fixtures, audio and
//!   background documents.
//! - [`harness`] — the operator-facing run/curve/extract/score commands used
//!   by the `simulstream` binary.
//!
//! Each major capability has a runnable example under `examples/`; start
//! with `scripted_session`:
//!
//! ```bash
//! cargo run --example scripted_session
//! ```

pub mod asr;
pub mod datasets;
pub mod harness;
pub mod llm;
pub mod metrics;
pub mod policy;
pub mod prompt;
pub mod remote;

pub use asr::{AsrBackend, AudioTimeline, FixtureAsr, TimedWord, TranscriptState};
pub use llm::{GenerationRequest, LlmBackend, ScriptedLlm, TokenEvent, WordOutcome};
pub use metrics::{DelaySequence, MetricReport};
pub use policy::{Action, Session, SessionConfig, TranslationRecord};
pub use prompt::{BackgroundInfo, ChatTemplate, PromptSpec};
