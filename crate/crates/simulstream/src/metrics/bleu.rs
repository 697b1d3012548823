//! Corpus BLEU with the language-independent (international) tokenization.
//!
//! Scores follow the standard corpus convention: 4-gram precisions from
//! counts pooled over the whole corpus (not averaged per sentence), an
//! exponential floor for zero n-gram matches, and the exponential brevity
//! penalty. Tokenization separates punctuation not attached to digits and
//! all symbols, by Unicode general category, and is case-sensitive. The
//! scheme is pinned in [`BLEU_TOKENIZATION`] and folded into config
//! fingerprints so scores are never compared across tokenizations.

use std::collections::HashMap;
use std::sync::LazyLock;

use regex::Regex;

use super::MetricsError;

/// Identifier of the pinned scoring convention.
pub const BLEU_TOKENIZATION: &str = "mteval-v14-international/case-sensitive";

pub const MAX_NGRAM_ORDER: usize = 4;

// Placeholder for log(0) in the geometric mean, large enough to zero the
// score through exp().
const LOG_ZERO: f64 = -9_999_999_999.0;

static PUNCT_AFTER_NON_NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(\P{N})(\p{P})").unwrap());
static PUNCT_BEFORE_NON_NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(\p{P})(\P{N})").unwrap());
static SYMBOL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(\p{S})").unwrap());

/// International tokenization: split out punctuation preceded or followed by
/// a non-number, split out symbols, then collapse whitespace.
pub fn tokenize_intl(line: &str) -> Vec<String> {
    let line = PUNCT_AFTER_NON_NUMBER.replace_all(line, "$1 $2 ");
    let line = PUNCT_BEFORE_NON_NUMBER.replace_all(&line, " $1 $2");
    let line = SYMBOL.replace_all(&line, " $1 ");
    line.split_whitespace().map(str::to_string).collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus BLEU on 0..100. Requires equally long, non-empty hypothesis and
/// reference lists.
pub fn corpus_bleu<H, R>(hypotheses: &[H], references: &[R]) -> Result<f64, MetricsError>
where
    H: AsRef<str>,
    R: AsRef<str>,
{
    if hypotheses.is_empty() {
        return Err(MetricsError::InvalidInput("empty corpus".into()));
    }
    if hypotheses.len() != references.len() {
        return Err(MetricsError::InvalidInput(format!(
            "{} hypotheses against {} references",
            hypotheses.len(),
            references.len()
        )));
    }
    let mut correct = [0u64; MAX_NGRAM_ORDER];
    let mut total = [0u64; MAX_NGRAM_ORDER];
    let mut sys_len = 0usize;
    let mut ref_len = 0usize;
    for (hyp, reference) in hypotheses.iter().zip(references) {
        let hyp_tokens = tokenize_intl(hyp.as_ref());
        let ref_tokens = tokenize_intl(reference.as_ref());
        sys_len += hyp_tokens.len();
        ref_len += ref_tokens.len();
        for n in 1..=MAX_NGRAM_ORDER {
            let ref_counts = ngram_counts(&ref_tokens, n);
            for (gram, count) in ngram_counts(&hyp_tokens, n) {
                correct[n - 1] += count.min(ref_counts.get(gram).copied().unwrap_or(0));
            }
            total[n - 1] += hyp_tokens.len().saturating_sub(n - 1) as u64;
        }
    }
    Ok(compute_score(&correct, &total, sys_len, ref_len))
}

fn compute_score(
    correct: &[u64; MAX_NGRAM_ORDER],
    total: &[u64; MAX_NGRAM_ORDER],
    sys_len: usize,
    ref_len: usize,
) -> f64 {
    let mut precisions = [0.0f64; MAX_NGRAM_ORDER];
    let mut smooth = 1.0f64;
    for n in 0..MAX_NGRAM_ORDER {
        if total[n] == 0 {
            break;
        }
        if correct[n] == 0 {
            // Exponential smoothing: each missing order halves the floor.
            smooth *= 2.0;
            precisions[n] = 1.0 / (smooth * total[n] as f64);
        } else {
            precisions[n] = correct[n] as f64 / total[n] as f64;
        }
    }
    let brevity_penalty = if sys_len < ref_len {
        if sys_len == 0 {
            0.0
        } else {
            (1.0 - ref_len as f64 / sys_len as f64).exp()
        }
    } else {
        1.0
    };
    let log_sum: f64 = precisions
        .iter()
        .map(|&p| if p > 0.0 { p.ln() } else { LOG_ZERO })
        .sum();
    100.0 * brevity_penalty * (log_sum / MAX_NGRAM_ORDER as f64).exp()
}
