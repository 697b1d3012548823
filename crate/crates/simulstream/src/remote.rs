//! Live backends over HTTP.
//!
//! The completion client speaks the standard inference-server wire protocol
//! (`POST /v1/completions` with `{model, prompt, temperature, max_tokens,
//! stop}`), which keeps the assistant turn caller-authored — response
//! priming needs a raw completion endpoint, not a chat-managed one. The
//! transcription client posts the accumulated audio prefix as little-endian
//! 16-bit PCM and accepts either `{"words": [...]}` or `{"text": "..."}`
//! responses.

use base64::Engine;
use serde_json::{json, Value};

use crate::asr::{AsrBackend, AsrError, AudioTimeline};
use crate::llm::{GenerationRequest, LlmBackend, LlmError, TokenEvent, TokenStream};

fn client() -> reqwest::blocking::Client {
    reqwest::blocking::Client::builder()
        .timeout(std::time::Duration::from_secs(120))
        .build()
        .expect("http client construction cannot fail")
}

/// Probe an endpoint for reachability: any HTTP response counts, connection
/// failures do not.
pub fn probe_endpoint(url: &str) -> Result<(), String> {
    client()
        .get(url)
        .send()
        .map(|_| ())
        .map_err(|e| format!("endpoint {url} unreachable: {e}"))
}

/// Text-completion client for a self-hosted inference server.
pub struct HttpLlm {
    client: reqwest::blocking::Client,
    base_url: String,
    model: String,
    api_key: Option<String>,
    stop: Vec<String>,
}

impl HttpLlm {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            client: client(),
            base_url: base_url.into().trim_end_matches('/').to_string(),
            model: model.into(),
            api_key: None,
            stop: Vec::new(),
        }
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    /// Stop sequences forwarded to the server, typically the chat template's
    /// turn-end marker.
    pub fn with_stop(mut self, stop: Vec<String>) -> Self {
        self.stop = stop;
        self
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }
}

impl LlmBackend for HttpLlm {
    fn stream(&self, request: &GenerationRequest) -> Result<TokenStream<'_>, LlmError> {
        let body = json!({
            "model": self.model,
            "prompt": request.prompt,
            "temperature": request.temperature,
            "max_tokens": request.max_new_tokens,
            "stop": self.stop,
            "stream": false,
        });
        let mut req = self
            .client
            .post(format!("{}/v1/completions", self.base_url))
            .json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let response = req.send().map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            let detail = response.text().unwrap_or_default();
            return Err(LlmError::Transport(format!(
                "completion endpoint returned {status}: {detail}"
            )));
        }
        let value: Value = response
            .json()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let choice = &value["choices"][0];
        let text = choice["text"].as_str().unwrap_or_default().to_string();
        let finish_reason = choice["finish_reason"].as_str().unwrap_or("stop");
        let mut events = Vec::new();
        if !text.is_empty() {
            events.push(Ok(TokenEvent::Fragment(text)));
        }
        // "length" means the server ran out of budget mid-stream; anything
        // else ends the turn.
        if finish_reason != "length" {
            events.push(Ok(TokenEvent::EndOfTurn));
        }
        Ok(Box::new(events.into_iter()))
    }
}

/// Transcription client posting the audio prefix to a recognition service.
pub struct HttpAsr {
    client: reqwest::blocking::Client,
    base_url: String,
    model: String,
    api_key: Option<String>,
}

impl HttpAsr {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            client: client(),
            base_url: base_url.into().trim_end_matches('/').to_string(),
            model: model.into(),
            api_key: None,
        }
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }
}

impl AsrBackend for HttpAsr {
    fn transcribe_prefix(
        &self,
        timeline: &AudioTimeline,
        upto_ms: u64,
    ) -> Result<Vec<String>, AsrError> {
        let (samples, sample_rate) = timeline.sample_prefix(upto_ms).ok_or_else(|| {
            AsrError::UnsupportedSource("live transcription requires a samples timeline".into())
        })?;
        let mut bytes = Vec::with_capacity(samples.len() * 2);
        for sample in samples {
            bytes.extend_from_slice(&sample.to_le_bytes());
        }
        let body = json!({
            "model": self.model,
            "sample_rate": sample_rate,
            "encoding": "pcm_s16le",
            "audio_b64": base64::engine::general_purpose::STANDARD.encode(&bytes),
        });
        let mut req = self
            .client
            .post(format!("{}/v1/transcribe", self.base_url))
            .json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let response = req.send().map_err(|e| AsrError::Transient(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            let detail = response.text().unwrap_or_default();
            return Err(AsrError::Transient(format!(
                "transcription endpoint returned {status}: {detail}"
            )));
        }
        let value: Value = response
            .json()
            .map_err(|e| AsrError::Transient(e.to_string()))?;
        if let Some(words) = value["words"].as_array() {
            return Ok(words
                .iter()
                .filter_map(|w| w.as_str())
                .map(str::to_string)
                .collect());
        }
        if let Some(text) = value["text"].as_str() {
            return Ok(text.split_whitespace().map(str::to_string).collect());
        }
        Err(AsrError::Transient(
            "transcription response carried neither \"words\" nor \"text\"".into(),
        ))
    }
}
