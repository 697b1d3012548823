//! Script files for the mock completion backend.
//!
//! A script file is a JSON object mapping sentence ids to ordered fragment
//! lists. Within a list, [`crate::llm::END_OF_TURN_MARKER`] ends a turn and
//! [`crate::llm::DEFER_MARKER`] holds the rest of the script back until the
//! final run-to-end completion. The `"*"` key, when present, is the default
//! script for ids without their own entry.

use std::collections::HashMap;
use std::path::Path;

use crate::llm::ScriptedLlm;

use super::HarnessError;

pub const DEFAULT_KEY: &str = "*";

#[derive(Debug, Clone)]
pub struct ScriptBook {
    sessions: HashMap<String, Vec<String>>,
}

impl ScriptBook {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let sessions: HashMap<String, Vec<String>> = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("script file {}: {e}", path.display())))?;
        Ok(Self { sessions })
    }

    pub fn from_map(sessions: HashMap<String, Vec<String>>) -> Self {
        Self { sessions }
    }

    /// Fail fast when any id lacks both its own script and a default.
    pub fn ensure_covered<'a>(
        &self,
        ids: impl IntoIterator<Item = &'a str>,
    ) -> Result<(), HarnessError> {
        if self.sessions.contains_key(DEFAULT_KEY) {
            return Ok(());
        }
        let missing: Vec<&str> = ids
            .into_iter()
            .filter(|id| !self.sessions.contains_key(**&id))
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Config(format!(
                "script file has no entry (and no \"*\" default) for: {}",
                missing.join(", ")
            )))
        }
    }

    /// A fresh scripted backend positioned at the start of the session's
    /// fragment list.
    pub fn scripted_for(&self, id: &str) -> Result<ScriptedLlm, HarnessError> {
        let markers = self
            .sessions
            .get(id)
            .or_else(|| self.sessions.get(DEFAULT_KEY))
            .ok_or_else(|| {
                HarnessError::Config(format!("script file has no entry for id {id:?}"))
            })?;
        Ok(ScriptedLlm::from_markers(markers.iter().cloned()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn book(pairs: &[(&str, &[&str])]) -> ScriptBook {
        ScriptBook::from_map(
            pairs
                .iter()
                .map(|(k, v)| (k.to_string(), v.iter().map(|s| s.to_string()).collect()))
                .collect(),
        )
    }

    #[test]
    fn falls_back_to_default_key() {
        let b = book(&[("*", &["x", "<|eot_id|>"])]);
        assert!(b.scripted_for("anything").is_ok());
        assert!(b.ensure_covered(["a", "b"]).is_ok());
    }

    #[test]
    fn missing_ids_listed() {
        let b = book(&[("s1", &["x"])]);
        let err = b.ensure_covered(["s1", "s2", "s3"]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("s2") && msg.contains("s3") && !msg.contains("s1,"));
    }
}
