//! Real-time factor: wall-clock translation time over source audio
//! duration. A system with RTF <= 1 can in principle run live.

use super::MetricsError;

pub fn real_time_factor(wall_time_ms: u64, audio_duration_ms: u64) -> Result<f64, MetricsError> {
    if audio_duration_ms == 0 {
        return Err(MetricsError::InvalidInput("zero audio duration".into()));
    }
    Ok(wall_time_ms as f64 / audio_duration_ms as f64)
}

/// Corpus RTF over `(wall_ms, audio_ms)` clips: total wall over total audio,
/// not the mean of per-clip ratios.
pub fn corpus_rtf(clips: &[(u64, u64)]) -> Result<f64, MetricsError> {
    if clips.is_empty() {
        return Err(MetricsError::InvalidInput("no clips".into()));
    }
    let wall: u64 = clips.iter().map(|c| c.0).sum();
    let audio: u64 = clips.iter().map(|c| c.1).sum();
    real_time_factor(wall, audio)
}
