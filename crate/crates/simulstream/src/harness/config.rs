//! Run configuration: backends, session knobs, sweep points and output.

use std::path::PathBuf;

use crate::policy::SessionConfig;

use super::HarnessError;

/// Where recognized words come from. Mock and live are mutually exclusive
/// by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AsrMode {
    /// Timed-transcript fixtures referenced by the manifest.
    Fixture,
    Endpoint { url: String, model: String },
}

/// Where completions come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LlmMode {
    /// Script file mapping sentence ids to fragment lists.
    Script(PathBuf),
    Endpoint { url: String, model: String },
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub manifest_path: PathBuf,
    pub asr: AsrMode,
    pub llm: LlmMode,
    pub session: SessionConfig,
    /// min_read_time values for `curve`, in ms, strictly increasing.
    pub sweep: Vec<u64>,
    pub out_dir: PathBuf,
    /// Worker threads; 0 picks a default (1 in live mode for timing purity,
    /// all cores otherwise).
    pub parallelism: usize,
    /// Skip manifest entries whose records are already on disk.
    pub resume: bool,
    /// Write every rendered prompt to `<out_dir>/prompts/<id>.txt`.
    pub dump_prompts: bool,
    pub asr_api_key: Option<String>,
    pub llm_api_key: Option<String>,
}

impl RunConfig {
    pub fn new(manifest_path: PathBuf, asr: AsrMode, llm: LlmMode, out_dir: PathBuf) -> Self {
        Self {
            manifest_path,
            asr,
            llm,
            session: SessionConfig::default(),
            sweep: Vec::new(),
            out_dir,
            parallelism: 0,
            resume: false,
            dump_prompts: false,
            asr_api_key: None,
            llm_api_key: None,
        }
    }

    /// True when every backend is a live service; only then are wall times
    /// meaningful and RTF reported.
    pub fn is_live(&self) -> bool {
        matches!(self.asr, AsrMode::Endpoint { .. }) && matches!(self.llm, LlmMode::Endpoint { .. })
    }

    pub fn effective_parallelism(&self) -> usize {
        if self.parallelism > 0 {
            self.parallelism
        } else if self.is_live() {
            // Uncontended measurement keeps RTF honest.
            1
        } else {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.session.chunk_duration_ms == 0 {
            return Err(HarnessError::Config("chunk duration must be > 0".into()));
        }
        if self.session.max_word_tokens == 0 || self.session.max_final_tokens == 0 {
            return Err(HarnessError::Config("token budgets must be > 0".into()));
        }
        for pair in self.sweep.windows(2) {
            if pair[1] <= pair[0] {
                return Err(HarnessError::Config(format!(
                    "sweep values must be strictly increasing ({} after {})",
                    pair[1], pair[0]
                )));
            }
        }
        self.session
            .template
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(())
    }
}
