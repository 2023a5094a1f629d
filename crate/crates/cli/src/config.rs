use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::ValueEnum;
use narrate_core::animation::{default_library, Library};
use narrate_core::export::digest;
use narrate_core::scheduler::{Limits, SchedulerConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum LinkerBackend {
    #[default]
    Rules,
    Llm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TtsBackend {
    #[default]
    Mock,
    Service,
}

/// `scene.json`. Every field is optional; relative paths are resolved
/// against the file's directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneFile {
    pub svg: Option<PathBuf>,
    pub narration: Option<PathBuf>,
    pub linker: Option<LinkerBackend>,
    pub tts: Option<TtsBackend>,
    pub voice: Option<String>,
    pub library: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub max_nodes: Option<u64>,
    pub max_time_ms: Option<u64>,
    pub fps: Option<u32>,
    pub no_role_order: Option<bool>,
    pub min_emphasis_ms: Option<u64>,
    pub highlight: Option<String>,
    pub llm_replay: Option<PathBuf>,
}

impl SceneFile {
    pub fn load(path: &Path) -> Result<SceneFile, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::input("config", format!("{}: {e}", path.display())))?;
        let mut f: SceneFile = serde_json::from_slice(&bytes)
            .map_err(|e| CliError::input("config", format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut f.svg,
            &mut f.narration,
            &mut f.library,
            &mut f.out,
            &mut f.llm_replay,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(f)
    }

    /// Fields set in `over` replace ours.
    pub fn overlay(self, over: SceneFile) -> SceneFile {
        SceneFile {
            svg: over.svg.or(self.svg),
            narration: over.narration.or(self.narration),
            linker: over.linker.or(self.linker),
            tts: over.tts.or(self.tts),
            voice: over.voice.or(self.voice),
            library: over.library.or(self.library),
            out: over.out.or(self.out),
            max_nodes: over.max_nodes.or(self.max_nodes),
            max_time_ms: over.max_time_ms.or(self.max_time_ms),
            fps: over.fps.or(self.fps),
            no_role_order: over.no_role_order.or(self.no_role_order),
            min_emphasis_ms: over.min_emphasis_ms.or(self.min_emphasis_ms),
            highlight: over.highlight.or(self.highlight),
            llm_replay: over.llm_replay.or(self.llm_replay),
        }
    }
}

pub const DEFAULT_FPS: u32 = 24;
pub const DEFAULT_VOICE: &str = "default";

/// A fully resolved scene: inputs checked, defaults filled in.
#[derive(Debug, Clone)]
pub struct SceneConfig {
    pub svg: PathBuf,
    pub narration: PathBuf,
    pub linker: LinkerBackend,
    pub tts: TtsBackend,
    pub voice: String,
    pub library_path: Option<PathBuf>,
    pub library: Library,
    pub out: PathBuf,
    pub limits: Limits,
    pub fps: u32,
    pub scheduler: SchedulerConfig,
    pub llm_replay: Option<PathBuf>,
}

fn valid_color(c: &str) -> bool {
    match c.strip_prefix('#') {
        Some(hex) => matches!(hex.len(), 3 | 6) && hex.chars().all(|ch| ch.is_ascii_hexdigit()),
        None => !c.is_empty() && c.chars().all(|ch| ch.is_ascii_alphabetic()),
    }
}

impl SceneConfig {
    pub fn resolve(f: SceneFile) -> Result<SceneConfig, CliError> {
        let existing = |p: Option<PathBuf>, what: &str| -> Result<PathBuf, CliError> {
            let p = p.ok_or_else(|| CliError::input("config", format!("no {what} given (--{what})")))?;
            if !p.is_file() {
                return Err(CliError::input("config", format!("{what} not found: {}", p.display())));
            }
            Ok(p)
        };
        let svg = existing(f.svg, "svg")?;
        let narration = existing(f.narration, "narration")?;
        let library_path = f.library;
        let mut library = match &library_path {
            Some(p) => Library::load(p).map_err(|e| CliError::input("library", e.to_string()))?,
            None => default_library(),
        };
        if let Some(c) = f.highlight {
            if !valid_color(&c) {
                return Err(CliError::input(
                    "config",
                    format!("highlight color `{c}` is not #rgb, #rrggbb or a color name"),
                ));
            }
            library.highlight_color = c;
        }
        let fps = f.fps.unwrap_or(DEFAULT_FPS);
        if !(1..=60).contains(&fps) {
            return Err(CliError::input(
                "config",
                format!("fps must be within 1..=60, got {fps}"),
            ));
        }
        let defaults = Limits::default();
        let scheduler = SchedulerConfig {
            min_emphasis_ms: f.min_emphasis_ms.unwrap_or(SchedulerConfig::default().min_emphasis_ms),
            role_order: !f.no_role_order.unwrap_or(false),
        };
        Ok(SceneConfig {
            svg,
            narration,
            linker: f.linker.unwrap_or_default(),
            tts: f.tts.unwrap_or_default(),
            voice: f.voice.unwrap_or_else(|| DEFAULT_VOICE.into()),
            library_path,
            library,
            out: f.out.unwrap_or_else(|| PathBuf::from("out")),
            limits: Limits {
                max_nodes: f.max_nodes.unwrap_or(defaults.max_nodes),
                max_time: f.max_time_ms.map(Duration::from_millis).unwrap_or(defaults.max_time),
            },
            fps,
            scheduler,
            llm_replay: f.llm_replay,
        })
    }

    /// Digest of every setting that can change the timeline. Paths are left
    /// out so the same scene hashes alike wherever it lives.
    pub fn digest(&self) -> String {
        let lib = serde_json::to_vec(&self.library).expect("library serializes");
        let value = serde_json::json!({
            "linker": self.linker,
            "tts": self.tts,
            "voice": self.voice,
            "library": digest(&lib),
            "max_nodes": self.limits.max_nodes,
            "max_time_ms": self.limits.max_time.as_millis() as u64,
            "role_order": self.scheduler.role_order,
            "min_emphasis_ms": self.scheduler.min_emphasis_ms,
        });
        digest(value.to_string().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_the_file() {
        let file = SceneFile {
            fps: Some(10),
            linker: Some(LinkerBackend::Llm),
            ..SceneFile::default()
        };
        let flags = SceneFile {
            fps: Some(30),
            ..SceneFile::default()
        };
        let merged = file.overlay(flags);
        assert_eq!(merged.fps, Some(30));
        assert_eq!(merged.linker, Some(LinkerBackend::Llm));
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.json");
        std::fs::write(&path, r#"{"svg": "chart.svg", "linker": "rules", "out": "/abs/out"}"#).unwrap();
        let f = SceneFile::load(&path).unwrap();
        assert_eq!(f.svg.unwrap(), dir.path().join("chart.svg"));
        assert_eq!(f.out.unwrap(), PathBuf::from("/abs/out"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.json");
        std::fs::write(&path, r#"{"svgg": "chart.svg"}"#).unwrap();
        assert_eq!(SceneFile::load(&path).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn colors() {
        assert!(valid_color("#d62728"));
        assert!(valid_color("#abc"));
        assert!(valid_color("crimson"));
        assert!(!valid_color("#12"));
        assert!(!valid_color("red;"));
    }
}
