//! Greedy continuation of a primed prompt, one word at a time.
//!
//! A backend streams token events for a completion request; this module
//! assembles those fragments into whole words. A word is complete when the
//! accumulated text contains whitespace after at least one non-whitespace
//! character; the pre-space part is returned and the remainder is carried
//! over. The carry is not hidden state: the caller threads it between calls
//! and it is re-injected by appending it to the prompt, so backends stay
//! stateless.

use std::sync::Mutex;

use thiserror::Error;

/// Default fragment budget for one word completion.
pub const DEFAULT_MAX_WORD_TOKENS: usize = 24;
/// Default fragment budget for completing the remaining suffix.
pub const DEFAULT_MAX_FINAL_TOKENS: usize = 256;

/// Marker string understood by script files: end the current turn.
pub const END_OF_TURN_MARKER: &str = "<|eot_id|>";
/// Marker string understood by script files: answer end-of-turn to every
/// word request and only release the remaining script during the final
/// (run-to-end) completion. Scripts use this to defer all output until the
/// whole source has been heard.
pub const DEFER_MARKER: &str = "<|defer_until_final|>";

#[derive(Debug, Error)]
pub enum LlmError {
    /// Transport-level failure; safe to retry.
    #[error("transient LLM backend error: {0}")]
    Transport(String),
    /// The fragment budget ran out before a word boundary appeared. The
    /// accumulated text is preserved so the caller can treat this as an
    /// end of turn without losing output.
    #[error("no word boundary within the fragment budget")]
    WordOverflow { carry: String },
    #[error("invalid generation request: {0}")]
    InvalidRequest(String),
}

/// What the consumer is waiting for; lets scripted backends distinguish the
/// per-word calls from the final run-to-end call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopCondition {
    WordBoundary,
    EndOfTurn,
}

/// A text-completion request. Generation is always greedy.
#[derive(Debug, Clone)]
pub struct GenerationRequest {
    pub prompt: String,
    pub stop_on: StopCondition,
    pub max_new_tokens: usize,
    pub temperature: f32,
}

impl GenerationRequest {
    pub fn new(prompt: String, stop_on: StopCondition, max_new_tokens: usize) -> Self {
        Self {
            prompt,
            stop_on,
            max_new_tokens,
            temperature: 0.0,
        }
    }
}

/// One streamed generation event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenEvent {
    /// A piece of generated text; may be less or more than one word.
    Fragment(String),
    /// The model has nothing further to emit for this prompt.
    EndOfTurn,
}

pub type TokenStream<'a> = Box<dyn Iterator<Item = Result<TokenEvent, LlmError>> + 'a>;

/// A completion backend. Implementations must be shareable across
/// concurrent sessions; every call is independent.
pub trait LlmBackend: Send + Sync {
    fn stream(&self, request: &GenerationRequest) -> Result<TokenStream<'_>, LlmError>;
}

/// Result of [`complete_word`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WordOutcome {
    Word(String),
    EndOfTurn,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordCompletion {
    pub outcome: WordOutcome,
    /// Generated text not yet emitted as a word; thread into the next call.
    pub carry: String,
}

/// Result of [`complete_to_end`] / [`complete_raw`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinalSuffix {
    pub text: String,
    /// True when the fragment budget ran out before end of turn.
    pub truncated: bool,
}

/// Consume events until one full word is available or the turn ends.
///
/// The returned word never is empty or contains internal whitespace. On
/// `EndOfTurn` the text accumulated so far is returned as the new carry, so
/// no generated text is ever dropped.
pub fn complete_word(
    backend: &dyn LlmBackend,
    prompt: &str,
    carry: &str,
    max_new_tokens: usize,
) -> Result<WordCompletion, LlmError> {
    if prompt.is_empty() {
        return Err(LlmError::InvalidRequest("empty prompt".into()));
    }
    if max_new_tokens == 0 {
        return Err(LlmError::InvalidRequest("max_new_tokens must be > 0".into()));
    }
    let mut accum = carry.to_string();
    // A multi-word carry already contains a boundary; no backend call needed.
    if let Some((word, rest)) = split_first_word(&accum) {
        return Ok(WordCompletion {
            outcome: WordOutcome::Word(word),
            carry: rest,
        });
    }
    let request = GenerationRequest::new(
        prime_with_carry(prompt, carry),
        StopCondition::WordBoundary,
        max_new_tokens,
    );
    let mut stream = backend.stream(&request)?;
    let mut pulled = 0usize;
    loop {
        match stream.next().transpose()? {
            None | Some(TokenEvent::EndOfTurn) => {
                return Ok(WordCompletion {
                    outcome: WordOutcome::EndOfTurn,
                    carry: accum.trim().to_string(),
                });
            }
            Some(TokenEvent::Fragment(fragment)) => {
                pulled += 1;
                accum.push_str(&fragment);
                if let Some((word, rest)) = split_first_word(&accum) {
                    return Ok(WordCompletion {
                        outcome: WordOutcome::Word(word),
                        carry: rest,
                    });
                }
                if pulled >= max_new_tokens {
                    return Err(LlmError::WordOverflow {
                        carry: accum.trim().to_string(),
                    });
                }
            }
        }
    }
}

/// Concatenate fragments until end of turn and whitespace-normalize the
/// result. Used once the source is fully revealed.
pub fn complete_to_end(
    backend: &dyn LlmBackend,
    prompt: &str,
    carry: &str,
    max_new_tokens: usize,
) -> Result<FinalSuffix, LlmError> {
    let raw = complete_raw(backend, prompt, carry, max_new_tokens)?;
    Ok(FinalSuffix {
        text: raw.text.split_whitespace().collect::<Vec<_>>().join(" "),
        truncated: raw.truncated,
    })
}

/// Like [`complete_to_end`] but without whitespace normalization. Used where
/// the verbatim response matters, e.g. when extracting structured documents.
pub fn complete_raw(
    backend: &dyn LlmBackend,
    prompt: &str,
    carry: &str,
    max_new_tokens: usize,
) -> Result<FinalSuffix, LlmError> {
    if prompt.is_empty() {
        return Err(LlmError::InvalidRequest("empty prompt".into()));
    }
    if max_new_tokens == 0 {
        return Err(LlmError::InvalidRequest("max_new_tokens must be > 0".into()));
    }
    let request = GenerationRequest::new(
        prime_with_carry(prompt, carry),
        StopCondition::EndOfTurn,
        max_new_tokens,
    );
    let mut stream = backend.stream(&request)?;
    let mut text = carry.to_string();
    let mut pulled = 0usize;
    let mut truncated = false;
    loop {
        match stream.next().transpose()? {
            None | Some(TokenEvent::EndOfTurn) => break,
            Some(TokenEvent::Fragment(fragment)) => {
                pulled += 1;
                text.push_str(&fragment);
                if pulled >= max_new_tokens {
                    truncated = true;
                    break;
                }
            }
        }
    }
    Ok(FinalSuffix { text, truncated })
}

/// Split off the first whitespace-delimited word, if the text contains a
/// boundary: whitespace following at least one non-whitespace character.
/// Punctuation with no following space stays attached to its word.
fn split_first_word(text: &str) -> Option<(String, String)> {
    let start = text.find(|c: char| !c.is_whitespace())?;
    let rest = &text[start..];
    let boundary = rest.find(char::is_whitespace)?;
    Some((
        rest[..boundary].to_string(),
        rest[boundary..].trim_start().to_string(),
    ))
}

/// Append the carried-over fragment to the prompt so the backend continues
/// from it.
fn prime_with_carry(prompt: &str, carry: &str) -> String {
    if carry.is_empty() {
        prompt.to_string()
    } else if prompt.chars().last().is_none_or(char::is_whitespace) {
        format!("{prompt}{carry}")
    } else {
        format!("{prompt} {carry}")
    }
}

/// Scripted backend: replays a fixed event sequence, advancing one shared
/// cursor as events are pulled. Output is a pure function of the script and
/// the cursor position; the prompt is ignored, which makes runs with
/// different prompt ablations directly comparable.
///
/// Once the script is exhausted every further stream yields a single
/// implicit end of turn, so sessions always terminate.
#[derive(Debug)]
pub struct ScriptedLlm {
    events: Vec<ScriptEvent>,
    pos: Mutex<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptEvent {
    Fragment(String),
    EndOfTurn,
    DeferUntilFinal,
}

impl ScriptedLlm {
    pub fn new(events: Vec<ScriptEvent>) -> Self {
        Self {
            events,
            pos: Mutex::new(0),
        }
    }

    /// Parse a flat marker list: [`END_OF_TURN_MARKER`] ends a turn,
    /// [`DEFER_MARKER`] defers the rest of the script to the final
    /// completion, anything else is a literal fragment.
    pub fn from_markers<I, S>(items: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let events = items
            .into_iter()
            .map(|item| {
                let s = item.into();
                match s.as_str() {
                    END_OF_TURN_MARKER => ScriptEvent::EndOfTurn,
                    DEFER_MARKER => ScriptEvent::DeferUntilFinal,
                    _ => ScriptEvent::Fragment(s),
                }
            })
            .collect();
        Self::new(events)
    }

    /// Number of script events consumed so far.
    pub fn position(&self) -> usize {
        *self.pos.lock().unwrap()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

struct ScriptStream<'a> {
    llm: &'a ScriptedLlm,
    stop_on: StopCondition,
    done: bool,
}

impl Iterator for ScriptStream<'_> {
    type Item = Result<TokenEvent, LlmError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let mut pos = self.llm.pos.lock().unwrap();
        loop {
            match self.llm.events.get(*pos) {
                None => {
                    self.done = true;
                    return Some(Ok(TokenEvent::EndOfTurn));
                }
                Some(ScriptEvent::Fragment(f)) => {
                    *pos += 1;
                    return Some(Ok(TokenEvent::Fragment(f.clone())));
                }
                Some(ScriptEvent::EndOfTurn) => {
                    *pos += 1;
                    self.done = true;
                    return Some(Ok(TokenEvent::EndOfTurn));
                }
                Some(ScriptEvent::DeferUntilFinal) => {
                    if self.stop_on == StopCondition::WordBoundary {
                        // Hold position: keep answering end-of-turn until the
                        // final completion comes asking.
                        self.done = true;
                        return Some(Ok(TokenEvent::EndOfTurn));
                    }
                    *pos += 1;
                }
            }
        }
    }
}

impl LlmBackend for ScriptedLlm {
    fn stream(&self, request: &GenerationRequest) -> Result<TokenStream<'_>, LlmError> {
        Ok(Box::new(ScriptStream {
            llm: self,
            stop_on: request.stop_on,
            done: false,
        }))
    }
}
