//! Narration text and its audio timeline, the master clock of a video.
//!
//! All times are integer milliseconds.

mod mock;
mod tts;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use mock::{synthesize_mock, MockConfig};
pub use tts::{fetch_tts, HttpTtsClient, TtsClient, TtsError, TtsResponse, TtsWord};

pub type Millis = u64;

#[derive(Debug, thiserror::Error)]
pub enum NarrationError {
    #[error("narration is empty")]
    EmptyNarration,
    #[error("span {first}..={last} is out of range for {words} words")]
    SpanOutOfRange { first: usize, last: usize, words: usize },
    #[error("tts service unreachable: {0}")]
    TtsUnreachable(String),
    #[error("tts word mismatch at word {index}: expected `{expected}`, service gave `{found}`")]
    TtsWordMismatch {
        index: usize,
        expected: String,
        found: String,
    },
    #[error("tts returned non-monotone or empty timing at word {index}")]
    TtsInvalidTiming { index: usize },
    #[error("failed to persist audio to {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Word {
    pub text: String,
    /// Byte range of the stripped word within the raw narration.
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NarrationText {
    pub raw: String,
    pub words: Vec<Word>,
    /// Inclusive word-index ranges, one per sentence.
    pub sentences: Vec<SegmentSpan>,
}

impl NarrationText {
    pub fn sentence_of(&self, word: usize) -> Option<usize> {
        self.sentences
            .iter()
            .position(|s| s.first_word <= word && word <= s.last_word)
    }

    /// The raw text covered by a span, internal punctuation included.
    pub fn span_text(&self, span: SegmentSpan) -> &str {
        &self.raw[self.words[span.first_word].start..self.words[span.last_word].end]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SegmentSpan {
    pub first_word: usize,
    pub last_word: usize,
}

impl SegmentSpan {
    pub fn new(first_word: usize, last_word: usize) -> Self {
        debug_assert!(first_word <= last_word);
        Self { first_word, last_word }
    }

    pub fn single(word: usize) -> Self {
        Self::new(word, word)
    }

    pub fn len(&self) -> usize {
        self.last_word - self.first_word + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, other: &SegmentSpan) -> bool {
        self.first_word <= other.first_word && other.last_word <= self.last_word
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordTiming {
    pub word_index: usize,
    pub start: Millis,
    pub duration: Millis,
}

impl WordTiming {
    pub fn end(&self) -> Millis {
        self.start + self.duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AudioSource {
    Mock,
    TtsService,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AudioTimeline {
    pub timings: Vec<WordTiming>,
    pub total: Millis,
    pub audio_path: Option<PathBuf>,
    pub source: AudioSource,
}

/// Characters kept at word edges even though they are not alphanumeric:
/// currency and unit signs belong to the number they decorate.
const EDGE_KEEP: &[char] = &['%', '$', '€', '£', '¥', '°'];

pub(crate) fn strip_word(token: &str) -> &str {
    let keep = |c: char| c.is_alphanumeric() || EDGE_KEEP.contains(&c);
    let trimmed_end = token.trim_end_matches(|c: char| !keep(c));
    let start = trimmed_end
        .char_indices()
        .find(|&(i, c)| {
            keep(c) || (c == '-' && trimmed_end[i + 1..].chars().next().is_some_and(|n| n.is_ascii_digit()))
        })
        .map(|(i, _)| i)
        .unwrap_or(trimmed_end.len());
    &trimmed_end[start..]
}

fn ends_sentence(token: &str) -> bool {
    let t = token.trim_end_matches(['"', '\'', ')', ']', '}', '\u{201d}', '\u{2019}']);
    t.ends_with(['.', '!', '?', '\u{2026}'])
}

pub fn segment_words(raw: &str) -> Result<NarrationText, NarrationError> {
    if raw.trim().is_empty() {
        return Err(NarrationError::EmptyNarration);
    }
    let mut words = Vec::new();
    let mut sentences = Vec::new();
    let mut sentence_start = 0usize;

    let mut offset = 0usize;
    for token in raw.split_whitespace() {
        let token_start = offset + raw[offset..].find(token).expect("token comes from raw");
        offset = token_start + token.len();

        let stripped = strip_word(token);
        if !stripped.is_empty() {
            let lead = stripped.as_ptr() as usize - token.as_ptr() as usize;
            words.push(Word {
                text: stripped.to_string(),
                start: token_start + lead,
                end: token_start + lead + stripped.len(),
            });
        }
        if ends_sentence(token) && words.len() > sentence_start {
            sentences.push(SegmentSpan::new(sentence_start, words.len() - 1));
            sentence_start = words.len();
        }
    }
    if words.is_empty() {
        return Err(NarrationError::EmptyNarration);
    }
    if sentence_start < words.len() {
        sentences.push(SegmentSpan::new(sentence_start, words.len() - 1));
    }
    Ok(NarrationText {
        raw: raw.to_string(),
        words,
        sentences,
    })
}

/// Start and duration of a span: onset of its first word to the end of its
/// last word.
pub fn span_time(tl: &AudioTimeline, span: SegmentSpan) -> Result<(Millis, Millis), NarrationError> {
    let out_of_range = || NarrationError::SpanOutOfRange {
        first: span.first_word,
        last: span.last_word,
        words: tl.timings.len(),
    };
    if span.first_word > span.last_word {
        return Err(out_of_range());
    }
    let first = tl.timings.get(span.first_word).ok_or_else(out_of_range)?;
    let last = tl.timings.get(span.last_word).ok_or_else(out_of_range)?;
    Ok((first.start, last.end() - first.start))
}
