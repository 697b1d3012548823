//! Latency and quality measurement: average lagging (AL), length-aware
//! average lagging (LAAL), corpus BLEU, word error rate (WER) and real-time
//! factor (RTF), plus aggregation of per-sentence records into one report.
//!
//! All computations are pure; aggregation is a single fold over records.

use thiserror::Error;

mod bleu;
mod lagging;
mod report;
mod rtf;
mod wer;

pub use bleu::{corpus_bleu, tokenize_intl, BLEU_TOKENIZATION, MAX_NGRAM_ORDER};
pub use lagging::{average_lagging, length_aware_average_lagging, DelaySequence};
pub use report::{aggregate_report, MetricReport, SentenceMetrics};
pub use rtf::{corpus_rtf, real_time_factor};
pub use wer::{word_error_rate, WerStats};

#[derive(Debug, Error)]
pub enum MetricsError {
    /// The metric has no defined value for this input (e.g. empty
    /// hypothesis for AL, empty reference for WER).
    #[error("undefined metric: {0}")]
    Undefined(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
