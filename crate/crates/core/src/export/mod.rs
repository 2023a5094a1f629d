//! Timeline document, per-element visual state, frame snapshots, the static
//! preview page and the external encoder descriptor.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::animation::{Action, Library, Render};
use crate::chart::{ChartDocument, ChartError};
use crate::narration::{AudioSource, AudioTimeline, Millis, NarrationText};
use crate::scheduler::{on_screen_table, AnimationSequence, AnimationUnit, SolveStats, Visibility};

mod encode;
mod frames;
mod preview;
mod state;

pub use encode::{encoder_command, run_encoder, shell_script, EncoderCommand};
pub use frames::{render_frame, render_frames, FrameEntry, FrameManifest, FRAMES_MANIFEST};
pub use preview::emit_preview;
pub use state::{element_state, end_state, ElementState};

pub const TIMELINE_SCHEMA: &str = include_str!("../../assets/timeline.schema.json");
pub const TOOL_NAME: &str = "narrate";

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("timeline has no element `{0}`")]
    UnknownElement(String),
    #[error("fps must be within 1..=60, got {0}")]
    InvalidFps(u32),
    #[error("source graphic does not match the timeline (hash {found}, expected {expected})")]
    SourceMismatch { expected: String, found: String },
    #[error("timeline narration was synthesized but the audio file is missing: {0:?}")]
    MissingAudio(Option<PathBuf>),
    #[error("i/o failure on {path}: {source}")]
    IoFailure { path: PathBuf, source: std::io::Error },
    #[error("malformed timeline document: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error("encoder `{program}` failed: {message}")]
    Encoder { program: String, message: String },
}

impl ExportError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ExportError::IoFailure {
            path: path.into(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub source_hash: String,
    pub config_digest: String,
    pub highlight_color: String,
    pub objective_value: usize,
    pub optimal: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordEntry {
    pub text: String,
    pub start: Millis,
    pub duration: Millis,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Audio {
    pub source: AudioSource,
    pub total: Millis,
    /// File name of the synthesized audio, relative to the output directory.
    pub file: Option<String>,
    pub words: Vec<WordEntry>,
}

/// How one effect used by the timeline is drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectRender {
    pub action: Action,
    pub render: Render,
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub element_ids: Vec<String>,
    pub action: Action,
    /// Effect or preset name.
    pub effect: String,
    pub start: Millis,
    pub duration: Millis,
    /// Overrides for the effect params; empty for presets.
    pub params: BTreeMap<String, f64>,
    pub element_effects: BTreeMap<String, String>,
    pub link_index: Option<usize>,
}

impl Track {
    pub fn end(&self) -> Millis {
        self.start + self.duration
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineDocument {
    pub meta: Meta,
    pub audio: Audio,
    pub effects: BTreeMap<String, EffectRender>,
    pub tracks: Vec<Track>,
    pub on_screen: BTreeMap<String, Visibility>,
}

/// Hex SHA-256 of `bytes`, the digest format used across the document.
pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Builds the document for a checked sequence.
pub fn to_timeline_document(
    seq: &AnimationSequence,
    tl: &AudioTimeline,
    text: &NarrationText,
    doc: &ChartDocument,
    lib: &Library,
    config_digest: &str,
) -> TimelineDocument {
    let words = tl
        .timings
        .iter()
        .map(|w| WordEntry {
            text: text.words.get(w.word_index).map(|w| w.text.clone()).unwrap_or_default(),
            start: w.start,
            duration: w.duration,
        })
        .collect();
    let audio = Audio {
        source: tl.source,
        total: tl.total,
        file: tl
            .audio_path
            .as_ref()
            .and_then(|p| p.file_name())
            .map(|n| n.to_string_lossy().into_owned()),
        words,
    };

    let used: BTreeSet<&str> = seq
        .units
        .iter()
        .flat_map(|u| u.element_effects.values().map(String::as_str))
        .collect();
    let effects = used
        .into_iter()
        .filter_map(|name| lib.effect(name))
        .map(|e| {
            let params = e.params.iter().map(|p| (p.name.clone(), p.default)).collect();
            (
                e.name.clone(),
                EffectRender {
                    action: e.action,
                    render: e.render,
                    params,
                },
            )
        })
        .collect();

    let mut tracks: Vec<Track> = seq
        .units
        .iter()
        .map(|u| Track {
            element_ids: u.element_ids.iter().cloned().collect(),
            action: u.action,
            effect: u.effect.clone(),
            start: u.start,
            duration: u.duration,
            params: BTreeMap::new(),
            element_effects: u.element_effects.clone(),
            link_index: u.link_index,
        })
        .collect();
    tracks.sort_by(|a, b| (a.start, &a.element_ids, a.link_index).cmp(&(b.start, &b.element_ids, b.link_index)));

    TimelineDocument {
        meta: Meta {
            tool: TOOL_NAME.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            source_hash: doc.source_hash.clone(),
            config_digest: config_digest.into(),
            highlight_color: lib.highlight_color.clone(),
            objective_value: seq.objective_value,
            optimal: seq.stats.optimal,
        },
        audio,
        effects,
        tracks,
        on_screen: on_screen_table(seq, doc).entries,
    }
}

impl TimelineDocument {
    /// Canonical bytes: pretty UTF-8 JSON in field order, newline-terminated.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("timeline serializes");
        out.push(b'\n');
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ExportError> {
        Ok(serde_json::from_slice(bytes)?)
    }

    /// Recovers the animation sequence, for re-checking a stored timeline.
    pub fn to_sequence(&self) -> AnimationSequence {
        let units = self
            .tracks
            .iter()
            .map(|t| AnimationUnit {
                element_ids: t.element_ids.iter().cloned().collect(),
                start: t.start,
                duration: t.duration,
                action: t.action,
                effect: t.effect.clone(),
                element_effects: t.element_effects.clone(),
                link_index: t.link_index,
            })
            .collect();
        let mut seq = AnimationSequence::new(
            units,
            SolveStats {
                nodes: 0,
                wall_ms: 0,
                optimal: self.meta.optimal,
            },
        );
        seq.objective_value = self.meta.objective_value;
        seq
    }
}
