//! Operator-facing commands: run an evaluation over a manifest, sweep the
//! latency knob into a quality/latency curve, extract background documents
//! through a completion backend, and re-score existing record logs.

use thiserror::Error;

mod config;
mod curve;
mod extract;
mod run;
mod score;
mod scripts;

pub use config::{AsrMode, LlmMode, RunConfig};
pub use curve::{cmd_curve, CurvePoint, CurveSummary};
pub use extract::{cmd_extract_background, ExtractionConfig, ExtractionSummary};
pub use run::{cmd_run, read_records, RunSummary};
pub use score::cmd_score;
pub use scripts::ScriptBook;

use crate::datasets::DatasetError;
use crate::metrics::MetricsError;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad configuration or inputs; nothing was run.
    #[error("configuration error: {0}")]
    Config(String),
    /// A backend could not be reached or set up; nothing was run.
    #[error("backend error: {0}")]
    Backend(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("io error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {message}")]
    MalformedRecord {
        path: std::path::PathBuf,
        line: usize,
        message: String,
    },
}

impl HarnessError {
    /// Process exit code for this failure class: 1 for configuration
    /// problems, 2 for backend problems. (Partial per-sentence failures are
    /// reported in summaries and exit with 3, not through errors.)
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Backend(_) => 2,
            _ => 1,
        }
    }
}
