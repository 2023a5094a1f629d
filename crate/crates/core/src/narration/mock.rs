use serde::{Deserialize, Serialize};

use super::{AudioSource, AudioTimeline, Millis, NarrationText, WordTiming};

/// Timing model of the offline stand-in for a speech service.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockConfig {
    pub per_char_ms: Millis,
    pub min_ms: Millis,
    pub gap_ms: Millis,
    pub pause_ms: Millis,
}

impl Default for MockConfig {
    fn default() -> Self {
        Self {
            per_char_ms: 70,
            min_ms: 150,
            gap_ms: 50,
            pause_ms: 300,
        }
    }
}

/// Deterministic word timings: each word lasts `max(min_ms, per_char_ms ×
/// chars)`, words are `gap_ms` apart, and sentence ends add `pause_ms`.
pub fn synthesize_mock(text: &NarrationText, cfg: &MockConfig) -> AudioTimeline {
    let mut timings = Vec::with_capacity(text.words.len());
    let mut cursor: Millis = 0;
    for (i, word) in text.words.iter().enumerate() {
        let chars = word.text.chars().count() as Millis;
        let duration = (cfg.per_char_ms * chars).max(cfg.min_ms).max(1);
        timings.push(WordTiming {
            word_index: i,
            start: cursor,
            duration,
        });
        cursor += duration + cfg.gap_ms;
        if text.sentences.iter().any(|s| s.last_word == i) {
            cursor += cfg.pause_ms;
        }
    }
    let total = timings.last().map(WordTiming::end).unwrap_or(0);
    AudioTimeline {
        timings,
        total,
        audio_path: None,
        source: AudioSource::Mock,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::narration::segment_words;

    #[test]
    fn per_char_duration() {
        let t = segment_words("GDP").unwrap();
        let tl = synthesize_mock(&t, &MockConfig::default());
        assert_eq!(tl.timings[0].duration, 210);
    }

    #[test]
    fn floor_applies() {
        let t = segment_words("a").unwrap();
        let tl = synthesize_mock(&t, &MockConfig::default());
        assert_eq!(tl.timings[0].duration, 150);
    }

    #[test]
    fn sentence_pause() {
        let t = segment_words("Hello. World.").unwrap();
        let tl = synthesize_mock(&t, &MockConfig::default());
        assert_eq!(tl.timings[1].start, 700);
        assert_eq!(tl.total, 1050);
        assert_eq!(tl.source, AudioSource::Mock);
    }

    #[test]
    fn deterministic_bytes() {
        let t = segment_words("Same text, same clock. Twice!").unwrap();
        let a = serde_json::to_vec(&synthesize_mock(&t, &MockConfig::default())).unwrap();
        let b = serde_json::to_vec(&synthesize_mock(&t, &MockConfig::default())).unwrap();
        assert_eq!(a, b);
    }
}
