use std::path::Path;
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{strip_word, AudioSource, AudioTimeline, Millis, NarrationError, NarrationText, WordTiming};

pub const ENDPOINT_VAR: &str = "NARRATE_TTS_ENDPOINT";
pub const KEY_VAR: &str = "NARRATE_TTS_KEY";

#[derive(Debug, thiserror::Error)]
pub enum TtsError {
    #[error("tts transport error: {0}")]
    Transport(String),
    #[error("tts response malformed: {0}")]
    Malformed(String),
    #[error("tts client is not configured: set {0}")]
    NotConfigured(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TtsWord {
    pub text: String,
    pub offset_ms: Millis,
    pub duration_ms: Millis,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TtsResponse {
    pub words: Vec<TtsWord>,
    pub audio: Vec<u8>,
}

/// A speech service that returns audio plus per-word boundaries.
pub trait TtsClient {
    fn synthesize(&self, text: &str) -> Result<TtsResponse, TtsError>;
}

#[derive(Serialize)]
struct WireRequest<'a> {
    text: &'a str,
    voice: &'a str,
}

#[derive(Deserialize)]
struct WireResponse {
    words: Vec<TtsWord>,
    /// Base64-encoded audio payload.
    audio: String,
}

/// JSON-over-HTTP speech client. POSTs `{text, voice}` and expects
/// `{words: [{text, offset_ms, duration_ms}], audio: <base64>}`.
#[derive(Debug, Clone)]
pub struct HttpTtsClient {
    pub endpoint: String,
    pub key: String,
    pub voice: String,
    pub timeout: Duration,
}

impl HttpTtsClient {
    pub fn from_env(voice: &str) -> Result<Self, TtsError> {
        let endpoint = std::env::var(ENDPOINT_VAR).map_err(|_| TtsError::NotConfigured(ENDPOINT_VAR))?;
        let key = std::env::var(KEY_VAR).map_err(|_| TtsError::NotConfigured(KEY_VAR))?;
        Ok(Self {
            endpoint,
            key,
            voice: voice.to_string(),
            timeout: Duration::from_secs(60),
        })
    }
}

impl TtsClient for HttpTtsClient {
    fn synthesize(&self, text: &str) -> Result<TtsResponse, TtsError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| TtsError::Transport(e.to_string()))?;
        let resp = client
            .post(&self.endpoint)
            .bearer_auth(&self.key)
            .json(&WireRequest {
                text,
                voice: &self.voice,
            })
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(|e| TtsError::Transport(e.to_string()))?;
        let wire: WireResponse = resp.json().map_err(|e| TtsError::Malformed(e.to_string()))?;
        let audio = base64::engine::general_purpose::STANDARD
            .decode(wire.audio.as_bytes())
            .map_err(|e| TtsError::Malformed(format!("audio payload: {e}")))?;
        Ok(TtsResponse {
            words: wire.words,
            audio,
        })
    }
}

fn normalize(word: &str) -> String {
    strip_word(word).to_lowercase()
}

/// Synthesizes the narration through `client`, aligns the service's word
/// boundaries onto our words, and writes the audio to `audio_out`.
///
/// Alignment is an in-order match of normalized words. Service tokens that
/// are pure punctuation are skipped. Any other divergence fails with the
/// index of the first mismatching word rather than being realigned.
pub fn fetch_tts(
    text: &NarrationText,
    client: &dyn TtsClient,
    audio_out: &Path,
) -> Result<AudioTimeline, NarrationError> {
    let resp = client.synthesize(&text.raw).map_err(|e| match e {
        TtsError::Malformed(m) => NarrationError::TtsUnreachable(format!("malformed response: {m}")),
        other => NarrationError::TtsUnreachable(other.to_string()),
    })?;

    let service: Vec<&TtsWord> = resp.words.iter().filter(|w| !normalize(&w.text).is_empty()).collect();

    let mut timings = Vec::with_capacity(text.words.len());
    for (i, word) in text.words.iter().enumerate() {
        let Some(got) = service.get(i) else {
            return Err(NarrationError::TtsWordMismatch {
                index: i,
                expected: word.text.clone(),
                found: String::new(),
            });
        };
        if normalize(&got.text) != normalize(&word.text) {
            return Err(NarrationError::TtsWordMismatch {
                index: i,
                expected: word.text.clone(),
                found: got.text.clone(),
            });
        }
        if got.duration_ms == 0 {
            return Err(NarrationError::TtsInvalidTiming { index: i });
        }
        if let Some(prev) = timings.last().map(WordTiming::end) {
            if got.offset_ms < prev {
                return Err(NarrationError::TtsInvalidTiming { index: i });
            }
        }
        timings.push(WordTiming {
            word_index: i,
            start: got.offset_ms,
            duration: got.duration_ms,
        });
    }
    if let Some(extra) = service.get(text.words.len()) {
        return Err(NarrationError::TtsWordMismatch {
            index: text.words.len(),
            expected: String::new(),
            found: extra.text.clone(),
        });
    }

    std::fs::write(audio_out, &resp.audio).map_err(|source| NarrationError::Io {
        path: audio_out.to_path_buf(),
        source,
    })?;

    let total = resp
        .words
        .iter()
        .map(|w| w.offset_ms + w.duration_ms)
        .max()
        .unwrap_or(0);
    Ok(AudioTimeline {
        timings,
        total,
        audio_path: Some(audio_out.to_path_buf()),
        source: AudioSource::TtsService,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::narration::{segment_words, synthesize_mock, MockConfig};

    /// Fake service that speaks with the mock's timing model.
    struct EchoMock(MockConfig);

    impl TtsClient for EchoMock {
        fn synthesize(&self, text: &str) -> Result<TtsResponse, TtsError> {
            let t = segment_words(text).map_err(|e| TtsError::Malformed(e.to_string()))?;
            let tl = synthesize_mock(&t, &self.0);
            Ok(TtsResponse {
                words: t
                    .words
                    .iter()
                    .zip(&tl.timings)
                    .map(|(w, tm)| TtsWord {
                        text: w.text.clone(),
                        offset_ms: tm.start,
                        duration_ms: tm.duration,
                    })
                    .collect(),
                audio: b"RIFF".to_vec(),
            })
        }
    }

    struct Canned(Vec<TtsWord>);

    impl TtsClient for Canned {
        fn synthesize(&self, _text: &str) -> Result<TtsResponse, TtsError> {
            Ok(TtsResponse {
                words: self.0.clone(),
                audio: vec![1, 2, 3],
            })
        }
    }

    struct Down;

    impl TtsClient for Down {
        fn synthesize(&self, _text: &str) -> Result<TtsResponse, TtsError> {
            Err(TtsError::Transport("connection refused".into()))
        }
    }

    fn w(text: &str, offset_ms: Millis, duration_ms: Millis) -> TtsWord {
        TtsWord {
            text: text.into(),
            offset_ms,
            duration_ms,
        }
    }

    #[test]
    fn echo_of_mock_matches_mock() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("a.mp3");
        let t = segment_words("The air cleared. It was 38.2 on the 15th!").unwrap();
        let cfg = MockConfig::default();
        let fetched = fetch_tts(&t, &EchoMock(cfg), &out).unwrap();
        let mock = synthesize_mock(&t, &cfg);
        assert_eq!(fetched.timings, mock.timings);
        assert_eq!(fetched.total, mock.total);
        assert_eq!(fetched.source, AudioSource::TtsService);
        assert_eq!(std::fs::read(&out).unwrap(), b"RIFF");
    }

    #[test]
    fn verbatim_in_order_and_punctuation_tokens_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let t = segment_words("Air, cleared.").unwrap();
        let client = Canned(vec![
            w("Air", 0, 300),
            w(",", 300, 10),
            w("cleared", 400, 500),
            w(".", 900, 5),
        ]);
        let tl = fetch_tts(&t, &client, &dir.path().join("x")).unwrap();
        assert_eq!(
            tl.timings[1],
            WordTiming {
                word_index: 1,
                start: 400,
                duration: 500
            }
        );
        assert_eq!(tl.total, 905);
    }

    #[test]
    fn split_hyphenated_word_is_a_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let t = segment_words("a well-known fact").unwrap();
        let client = Canned(vec![
            w("a", 0, 100),
            w("well", 150, 100),
            w("known", 300, 100),
            w("fact", 450, 100),
        ]);
        match fetch_tts(&t, &client, &dir.path().join("x")) {
            Err(NarrationError::TtsWordMismatch { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected mismatch, got {other:?}"),
        }
    }

    #[test]
    fn short_or_long_service_output_is_a_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let t = segment_words("one two").unwrap();
        let short = Canned(vec![w("one", 0, 100)]);
        assert!(matches!(
            fetch_tts(&t, &short, &dir.path().join("x")),
            Err(NarrationError::TtsWordMismatch { index: 1, .. })
        ));
        let long = Canned(vec![w("one", 0, 100), w("two", 200, 100), w("three", 400, 100)]);
        assert!(matches!(
            fetch_tts(&t, &long, &dir.path().join("x")),
            Err(NarrationError::TtsWordMismatch { index: 2, .. })
        ));
    }

    #[test]
    fn overlapping_timings_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let t = segment_words("one two").unwrap();
        let client = Canned(vec![w("one", 0, 300), w("two", 100, 100)]);
        assert!(matches!(
            fetch_tts(&t, &client, &dir.path().join("x")),
            Err(NarrationError::TtsInvalidTiming { index: 1 })
        ));
    }

    #[test]
    fn unreachable_service() {
        let dir = tempfile::tempdir().unwrap();
        let t = segment_words("one").unwrap();
        assert!(matches!(
            fetch_tts(&t, &Down, &dir.path().join("x")),
            Err(NarrationError::TtsUnreachable(_))
        ));
    }
}
