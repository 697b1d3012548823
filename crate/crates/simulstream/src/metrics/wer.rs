//! Word error rate: word-level Levenshtein edits over reference length.
//! Tokens are whitespace-delimited and compared exactly (case-sensitive,
//! matching the scoring pin used for BLEU).

use super::MetricsError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WerStats {
    /// Word-level edit distance between hypothesis and reference.
    pub edits: usize,
    pub ref_words: usize,
    pub wer: f64,
}

pub fn word_error_rate(hypothesis: &str, reference: &str) -> Result<WerStats, MetricsError> {
    let ref_tokens: Vec<&str> = reference.split_whitespace().collect();
    if ref_tokens.is_empty() {
        return Err(MetricsError::Undefined("empty reference".into()));
    }
    let hyp_tokens: Vec<&str> = hypothesis.split_whitespace().collect();
    let edits = levenshtein(&hyp_tokens, &ref_tokens);
    Ok(WerStats {
        edits,
        ref_words: ref_tokens.len(),
        wer: edits as f64 / ref_tokens.len() as f64,
    })
}

// DP over two rows, O(min(m,n)) memory.
fn levenshtein(a: &[&str], b: &[&str]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut prev: Vec<usize> = (0..=short.len()).collect();
    let mut curr = vec![0usize; short.len() + 1];
    for i in 1..=long.len() {
        curr[0] = i;
        for j in 1..=short.len() {
            let cost = usize::from(long[i - 1] != short[j - 1]);
            curr[j] = (prev[j] + 1).min(curr[j - 1] + 1).min(prev[j - 1] + cost);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[short.len()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_texts() {
        let s = word_error_rate("a b c", "a b c").unwrap();
        assert_eq!(s.edits, 0);
        assert_eq!(s.wer, 0.0);
    }

    #[test]
    fn one_substitution_in_three() {
        // DP table by hand: substituting x for b costs one edit.
        let s = word_error_rate("a x c", "a b c").unwrap();
        assert_eq!(s.edits, 1);
        assert!((s.wer - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_hypothesis_is_all_deletions() {
        let s = word_error_rate("", "w1 w2 w3 w4").unwrap();
        assert_eq!(s.edits, 4);
        assert_eq!(s.wer, 1.0);
    }

    #[test]
    fn empty_reference_is_undefined() {
        assert!(matches!(
            word_error_rate("something", "  "),
            Err(MetricsError::Undefined(_))
        ));
    }

    #[test]
    fn insertions_can_push_wer_above_one() {
        let s = word_error_rate("a b c d e", "x").unwrap();
        assert_eq!(s.edits, 5);
        assert_eq!(s.wer, 5.0);
    }
}
