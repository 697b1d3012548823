//! Average lagging: how far each emitted word trails an ideal translator
//! that paces itself uniformly over the source.
//!
//! With delays `d_1..d_|Y|` (ms of source audio elapsed at each emission)
//! and source duration `T`:
//!
//! ```text
//! AL = (1/tau) * sum_{i=1..tau} [ d_i - (i-1) * T / |Y| ]
//! ```
//!
//! where `tau` is the first index with `d_i >= T` (all of `|Y|` if none).
//! The `>=` tie rule matters: words emitted during finalization carry
//! exactly `d = T`. LAAL replaces `|Y|` in the pacing denominator with
//! `max(|Y|, |Y*|)`, so under-generation cannot masquerade as low latency.

use super::MetricsError;

/// Delays of one hypothesis against its source duration and reference
/// length. Construction validates the delay invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct DelaySequence {
    delays: Vec<f64>,
    source_duration: f64,
    ref_len: usize,
}

impl DelaySequence {
    pub fn new(
        delays: Vec<f64>,
        source_duration: f64,
        ref_len: usize,
    ) -> Result<Self, MetricsError> {
        if source_duration < 0.0 || !source_duration.is_finite() {
            return Err(MetricsError::InvalidInput(
                "source duration must be finite and non-negative".into(),
            ));
        }
        for (i, &d) in delays.iter().enumerate() {
            if !d.is_finite() || d < 0.0 || d > source_duration {
                return Err(MetricsError::InvalidInput(format!(
                    "delay {d} at index {i} outside [0, {source_duration}]"
                )));
            }
            if i > 0 && d < delays[i - 1] {
                return Err(MetricsError::InvalidInput(format!(
                    "delays must be non-decreasing, {d} after {}",
                    delays[i - 1]
                )));
            }
        }
        Ok(Self {
            delays,
            source_duration,
            ref_len,
        })
    }

    pub fn from_millis(
        delays_ms: &[u64],
        source_duration_ms: u64,
        ref_len: usize,
    ) -> Result<Self, MetricsError> {
        Self::new(
            delays_ms.iter().map(|&d| d as f64).collect(),
            source_duration_ms as f64,
            ref_len,
        )
    }

    pub fn hyp_len(&self) -> usize {
        self.delays.len()
    }

    pub fn ref_len(&self) -> usize {
        self.ref_len
    }

    pub fn source_duration(&self) -> f64 {
        self.source_duration
    }

    pub fn delays(&self) -> &[f64] {
        &self.delays
    }
}

fn lagging_with_denominator(d: &DelaySequence, denominator: usize) -> f64 {
    let t = d.source_duration;
    let step = t / denominator as f64;
    let tau = d
        .delays
        .iter()
        .position(|&di| di >= t)
        .map(|i| i + 1)
        .unwrap_or(d.delays.len());
    let sum: f64 = d.delays[..tau]
        .iter()
        .enumerate()
        .map(|(i, &di)| di - i as f64 * step)
        .sum();
    sum / tau as f64
}

/// Average lagging in milliseconds. May be negative for aggressively early
/// output.
pub fn average_lagging(d: &DelaySequence) -> Result<f64, MetricsError> {
    if d.hyp_len() == 0 {
        return Err(MetricsError::Undefined("empty hypothesis".into()));
    }
    Ok(lagging_with_denominator(d, d.hyp_len()))
}

/// Length-aware average lagging in milliseconds. Equals AL whenever the
/// hypothesis is at least as long as the reference.
pub fn length_aware_average_lagging(d: &DelaySequence) -> Result<f64, MetricsError> {
    if d.hyp_len() == 0 {
        return Err(MetricsError::Undefined("empty hypothesis".into()));
    }
    if d.ref_len() == 0 {
        return Err(MetricsError::Undefined("empty reference".into()));
    }
    Ok(lagging_with_denominator(d, d.hyp_len().max(d.ref_len())))
}
