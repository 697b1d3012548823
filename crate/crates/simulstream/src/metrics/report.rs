//! Aggregation of per-sentence translation records into one report.

use serde::{Deserialize, Serialize};

use super::{
    average_lagging, corpus_bleu, corpus_rtf, length_aware_average_lagging, word_error_rate,
    DelaySequence, MetricsError,
};
use crate::policy::TranslationRecord;

/// Per-record metric values. `None` marks a metric undefined for this
/// record (the record is then flagged excluded from the corresponding
/// corpus mean).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceMetrics {
    pub sentence_id: String,
    pub al_ms: Option<f64>,
    pub laal_ms: Option<f64>,
    pub wer: Option<f64>,
    pub hyp_len: usize,
    pub ref_len: usize,
    pub source_duration_ms: u64,
    pub excluded: bool,
}

/// Aggregated quality/latency report for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Corpus BLEU over all hypothesis/reference pairs.
    pub bleu: f64,
    /// Mean AL over records where it is defined.
    pub al_ms: f64,
    /// Mean LAAL over records where it is defined.
    pub laal_ms: f64,
    /// Pooled WER: total word edits over total reference words.
    pub wer: f64,
    /// Corpus RTF (total wall over total audio); absent when wall times are
    /// not meaningful, e.g. against scripted backends.
    pub rtf: Option<f64>,
    /// Number of records with at least one undefined metric.
    pub excluded_count: usize,
    pub per_sentence: Vec<SentenceMetrics>,
    pub config_fingerprint: String,
}

/// Fold records into a report. BLEU pools n-gram counts over the whole
/// corpus; AL/LAAL are means over records; WER and RTF pool totals.
pub fn aggregate_report(
    records: &[TranslationRecord],
    include_rtf: bool,
) -> Result<MetricReport, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::InvalidInput("no records".into()));
    }
    let fingerprint = records[0].config_fingerprint.clone();
    if let Some(mixed) = records
        .iter()
        .find(|r| r.config_fingerprint != fingerprint)
    {
        return Err(MetricsError::InvalidInput(format!(
            "records mix config fingerprints ({} vs {} in {})",
            fingerprint, mixed.config_fingerprint, mixed.sentence_id
        )));
    }

    let mut per_sentence = Vec::with_capacity(records.len());
    let mut al_values = Vec::new();
    let mut laal_values = Vec::new();
    let mut total_edits = 0usize;
    let mut total_ref_words = 0usize;
    for record in records {
        let hyp_len = record.hypothesis.split_whitespace().count();
        let ref_len = record.reference.split_whitespace().count();
        let lagging = DelaySequence::from_millis(
            &record.delays,
            record.source_duration_ms,
            ref_len,
        )?;
        let al = average_lagging(&lagging).ok();
        let laal = length_aware_average_lagging(&lagging).ok();
        let wer = word_error_rate(&record.hypothesis, &record.reference)
            .ok()
            .map(|stats| {
                total_edits += stats.edits;
                total_ref_words += stats.ref_words;
                stats.wer
            });
        if let Some(v) = al {
            al_values.push(v);
        }
        if let Some(v) = laal {
            laal_values.push(v);
        }
        let excluded = al.is_none() || laal.is_none() || wer.is_none();
        per_sentence.push(SentenceMetrics {
            sentence_id: record.sentence_id.clone(),
            al_ms: al,
            laal_ms: laal,
            wer,
            hyp_len,
            ref_len,
            source_duration_ms: record.source_duration_ms,
            excluded,
        });
    }

    let hypotheses: Vec<&str> = records.iter().map(|r| r.hypothesis.as_str()).collect();
    let references: Vec<&str> = records.iter().map(|r| r.reference.as_str()).collect();
    let bleu = corpus_bleu(&hypotheses, &references)?;

    if al_values.is_empty() {
        return Err(MetricsError::Undefined(
            "no record has a defined average lagging".into(),
        ));
    }
    if total_ref_words == 0 {
        return Err(MetricsError::Undefined("no non-empty reference".into()));
    }
    let rtf = if include_rtf {
        let clips: Vec<(u64, u64)> = records
            .iter()
            .map(|r| (r.wall_time_ms, r.source_duration_ms))
            .collect();
        Some(corpus_rtf(&clips)?)
    } else {
        None
    };
    Ok(MetricReport {
        bleu,
        al_ms: mean(&al_values),
        laal_ms: mean(&laal_values),
        wer: total_edits as f64 / total_ref_words as f64,
        rtf,
        excluded_count: per_sentence.iter().filter(|s| s.excluded).count(),
        per_sentence,
        config_fingerprint: fingerprint,
    })
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}
