//! Stage functions behind the `narrate` binary. Each stage reads the scene
//! inputs, reuses artifacts already in the output directory where the
//! stage allows it, and writes its own artifacts under fixed names.

use std::fs;
use std::path::{Path, PathBuf};

use narrate_core::chart::{display_value, extract_tables, parse_document, ChartDocument, Extraction};
use narrate_core::export::{
    emit_preview, encoder_command, render_frames, run_encoder, shell_script, to_timeline_document, EncoderCommand,
    FrameManifest, TimelineDocument,
};
use narrate_core::linker::{
    dedupe_links, link_llm, link_rules, parse_llm_output, resolve_elements, serialize_links, HttpLlmClient, LinkError,
    LinkSet, LlmClient, LlmError,
};
use narrate_core::narration::{
    fetch_tts, segment_words, synthesize_mock, AudioSource, AudioTimeline, HttpTtsClient, MockConfig, NarrationText,
    WordTiming,
};
use narrate_core::scheduler::{
    check, encode, solve, AnimationSequence, ConstraintProblem, EncodeError, SolveError, Violation,
};

mod config;

pub use config::{LinkerBackend, SceneConfig, SceneFile, TtsBackend, DEFAULT_FPS};

pub const TIMELINE_FILE: &str = "timeline.json";
pub const LINKS_FILE: &str = "links.txt";
pub const VIOLATIONS_FILE: &str = "violations.txt";
pub const FRAMES_DIR: &str = "frames";
pub const PREVIEW_FILE: &str = "preview.html";
pub const ENCODE_FILE: &str = "encode.sh";
pub const TRANSCRIPT_FILE: &str = "llm-transcript.txt";
pub const TABLES_DIR: &str = "tables";
pub const AUDIO_FILE: &str = "narration.audio";
pub const VIDEO_FILE: &str = "video.mp4";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Infeasible,
    Budget,
    External,
}

#[derive(Debug, thiserror::Error)]
#[error("{stage}: {message}")]
pub struct CliError {
    pub stage: &'static str,
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn new(stage: &'static str, kind: ErrorKind, message: impl Into<String>) -> Self {
        CliError {
            stage,
            kind,
            message: message.into(),
        }
    }

    pub fn input(stage: &'static str, message: impl Into<String>) -> Self {
        CliError::new(stage, ErrorKind::Input, message)
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Input => 2,
            ErrorKind::Infeasible => 3,
            ErrorKind::Budget => 4,
            ErrorKind::External => 5,
        }
    }
}

fn write(stage: &'static str, path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::input(stage, format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::input(stage, format!("{}: {e}", path.display())))
}

fn read(stage: &'static str, path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::input(stage, format!("{}: {e}", path.display())))
}

pub struct Chart {
    pub svg: Vec<u8>,
    pub doc: ChartDocument,
    pub extraction: Extraction,
}

pub fn load_chart(cfg: &SceneConfig) -> Result<Chart, CliError> {
    let svg = read("parse", &cfg.svg)?;
    let doc = parse_document(&svg).map_err(|e| CliError::input("parse", e.to_string()))?;
    let extraction = extract_tables(&doc).map_err(|e| CliError::input("tables", e.to_string()))?;
    for w in &extraction.warnings {
        eprintln!("warning: tables: {w}");
    }
    Ok(Chart { svg, doc, extraction })
}

pub fn load_text(cfg: &SceneConfig) -> Result<NarrationText, CliError> {
    let raw = read("narration", &cfg.narration)?;
    let raw = String::from_utf8(raw).map_err(|e| CliError::input("narration", e.to_string()))?;
    segment_words(&raw).map_err(|e| CliError::input("narration", e.to_string()))
}

/// Writes one CSV per table and returns their paths.
pub fn write_tables(cfg: &SceneConfig, chart: &Chart) -> Result<Vec<PathBuf>, CliError> {
    let mut paths = Vec::new();
    for t in &chart.extraction.tables {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| CliError::input("tables", e.to_string());
        w.write_record(&t.columns).map_err(csv_err)?;
        for row in &t.rows {
            w.write_record(row.iter().map(display_value)).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::input("tables", e.to_string()))?;
        let path = cfg
            .out
            .join(TABLES_DIR)
            .join(format!("table-{}-{}.csv", t.table_index, t.kind.as_str()));
        write("tables", &path, bytes)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Replays a recorded model reply instead of calling the service.
struct Replay(String);

impl LlmClient for Replay {
    fn complete(&self, _prompt: &str) -> Result<String, LlmError> {
        Ok(self.0.clone())
    }
}

fn link_error(e: LinkError) -> CliError {
    match e {
        LinkError::LlmUnreachable(_) | LinkError::LlmEmptyOutput => {
            CliError::new("link", ErrorKind::External, e.to_string())
        }
        other => CliError::input("link", other.to_string()),
    }
}

fn resolve(links: Vec<narrate_core::linker::TextVisualLink>, chart: &Chart) -> Result<LinkSet, CliError> {
    let resolved = resolve_elements(&dedupe_links(links), &chart.extraction.map).map_err(link_error)?;
    for w in &resolved.warnings {
        eprintln!("warning: link: {w}");
    }
    Ok(resolved.links)
}

/// Runs the configured linker and writes `links.txt` (and the model
/// transcript for the LLM backend).
pub fn link(cfg: &SceneConfig, chart: &Chart, text: &NarrationText) -> Result<LinkSet, CliError> {
    let tables = &chart.extraction.tables;
    let raw = match cfg.linker {
        LinkerBackend::Rules => link_rules(tables, text),
        LinkerBackend::Llm => {
            let transcript = cfg.out.join(TRANSCRIPT_FILE);
            fs::create_dir_all(&cfg.out).map_err(|e| CliError::input("link", e.to_string()))?;
            let parsed = match &cfg.llm_replay {
                Some(p) => {
                    let reply = String::from_utf8_lossy(&read("link", p)?).into_owned();
                    link_llm(tables, text, &Replay(reply), Some(&transcript))
                }
                None => {
                    let client = HttpLlmClient::from_env()
                        .map_err(|e| CliError::new("link", ErrorKind::External, e.to_string()))?;
                    link_llm(tables, text, &client, Some(&transcript))
                }
            }
            .map_err(link_error)?;
            for w in &parsed.warnings {
                eprintln!("warning: link: {w}");
            }
            parsed.links
        }
    };
    let links = resolve(raw, chart)?;
    write("link", &cfg.out.join(LINKS_FILE), serialize_links(links.iter(), text))?;
    Ok(links)
}

/// Links from an earlier `link` run, when `links.txt` exists.
pub fn stored_links(cfg: &SceneConfig, chart: &Chart, text: &NarrationText) -> Result<Option<LinkSet>, CliError> {
    let path = cfg.out.join(LINKS_FILE);
    if !path.is_file() {
        return Ok(None);
    }
    let raw = String::from_utf8_lossy(&read("link", &path)?).into_owned();
    let parsed = parse_llm_output(&raw, text, &chart.extraction.tables);
    if let Some(w) = parsed.warnings.first() {
        return Err(CliError::input("link", format!("{}: {w}", path.display())));
    }
    resolve(parsed.links, chart).map(Some)
}

fn links_for(cfg: &SceneConfig, chart: &Chart, text: &NarrationText) -> Result<LinkSet, CliError> {
    match stored_links(cfg, chart, text)? {
        Some(links) => Ok(links),
        None => link(cfg, chart, text),
    }
}

pub fn synthesize(cfg: &SceneConfig, text: &NarrationText) -> Result<AudioTimeline, CliError> {
    match cfg.tts {
        TtsBackend::Mock => Ok(synthesize_mock(text, &MockConfig::default())),
        TtsBackend::Service => {
            let client = HttpTtsClient::from_env(&cfg.voice)
                .map_err(|e| CliError::new("narration", ErrorKind::External, e.to_string()))?;
            fs::create_dir_all(&cfg.out).map_err(|e| CliError::input("narration", e.to_string()))?;
            fetch_tts(text, &client, &cfg.out.join(AUDIO_FILE))
                .map_err(|e| CliError::new("narration", ErrorKind::External, e.to_string()))
        }
    }
}

/// The audio timeline recorded in a timeline document.
pub fn stored_audio(cfg: &SceneConfig, tdoc: &TimelineDocument) -> AudioTimeline {
    AudioTimeline {
        timings: tdoc
            .audio
            .words
            .iter()
            .enumerate()
            .map(|(word_index, w)| WordTiming {
                word_index,
                start: w.start,
                duration: w.duration,
            })
            .collect(),
        total: tdoc.audio.total,
        audio_path: tdoc.audio.file.as_ref().map(|f| cfg.out.join(f)),
        source: tdoc.audio.source,
    }
}

pub fn problem(
    cfg: &SceneConfig,
    chart: &Chart,
    links: &LinkSet,
    tl: &AudioTimeline,
) -> Result<ConstraintProblem, CliError> {
    encode(&chart.doc, links, tl, &cfg.library, &cfg.scheduler).map_err(|e| match e {
        EncodeError::InfeasibleDomain { .. } => CliError::new("schedule", ErrorKind::Infeasible, e.to_string()),
        other => CliError::input("schedule", other.to_string()),
    })
}

fn count(n: usize) -> String {
    format!("{n} violation{}", if n == 1 { "" } else { "s" })
}

fn violations_text(v: &[Violation]) -> String {
    v.iter().map(|v| format!("{v}\n")).collect()
}

pub struct Scheduled {
    pub timeline: TimelineDocument,
    pub links: usize,
    /// Most animations playing at once.
    pub peak: usize,
}

fn write_timeline(
    cfg: &SceneConfig,
    seq: &AnimationSequence,
    p: &ConstraintProblem,
    chart: &Chart,
    text: &NarrationText,
    tl: &AudioTimeline,
) -> Result<TimelineDocument, CliError> {
    let violations = check(seq, p);
    write("check", &cfg.out.join(VIOLATIONS_FILE), violations_text(&violations))?;
    if !violations.is_empty() {
        return Err(CliError::new(
            "check",
            ErrorKind::Infeasible,
            format!("{}, see {VIOLATIONS_FILE}", count(violations.len())),
        ));
    }
    let tdoc = to_timeline_document(seq, tl, text, &chart.doc, &cfg.library, &cfg.digest());
    write("export", &cfg.out.join(TIMELINE_FILE), tdoc.to_bytes())?;
    Ok(tdoc)
}

/// Encodes, solves and checks, then writes `timeline.json` and
/// `violations.txt`. A run stopped by its budget still writes its best
/// schedule before failing.
pub fn schedule(
    cfg: &SceneConfig,
    chart: &Chart,
    text: &NarrationText,
    links: &LinkSet,
    emit_csp: Option<&Path>,
) -> Result<Scheduled, CliError> {
    let tl = synthesize(cfg, text)?;
    let p = problem(cfg, chart, links, &tl)?;
    if let Some(path) = emit_csp {
        let mut bytes = serde_json::to_vec_pretty(&p.to_json()).expect("problem serializes");
        bytes.push(b'\n');
        write("schedule", path, bytes)?;
    }
    match solve(&p, &cfg.limits) {
        Ok(seq) => {
            let timeline = write_timeline(cfg, &seq, &p, chart, text, &tl)?;
            Ok(Scheduled {
                timeline,
                links: links.len(),
                peak: seq.peak_concurrency(),
            })
        }
        Err(SolveError::Unsatisfiable { tags }) => {
            let tags: Vec<&str> = tags.iter().map(|t| t.as_str()).collect();
            Err(CliError::new(
                "schedule",
                ErrorKind::Infeasible,
                format!(
                    "no schedule satisfies the constraints; minimal conflicting families: {}",
                    tags.join(", ")
                ),
            ))
        }
        Err(SolveError::BudgetExceeded { best, nodes }) => {
            let mut message = format!("search budget exhausted after {nodes} nodes");
            if let Some(best) = best {
                write_timeline(cfg, &best, &p, chart, text, &tl)?;
                message.push_str(&format!(
                    "; best schedule so far ({} units) written, not proven minimal",
                    best.objective_value
                ));
            }
            Err(CliError::new("schedule", ErrorKind::Budget, message))
        }
    }
}

pub fn load_timeline(path: &Path) -> Result<TimelineDocument, CliError> {
    TimelineDocument::from_bytes(&read("check", path)?)
        .map_err(|e| CliError::input("check", format!("{}: {e}", path.display())))
}

/// Re-checks a stored timeline against the scene inputs.
pub fn check_timeline(
    cfg: &SceneConfig,
    chart: &Chart,
    text: &NarrationText,
    tdoc: &TimelineDocument,
) -> Result<Vec<Violation>, CliError> {
    if tdoc.meta.source_hash != chart.doc.source_hash {
        return Err(CliError::input("check", "timeline was built from a different graphic"));
    }
    if tdoc.audio.words.len() != text.words.len() {
        return Err(CliError::input(
            "check",
            "timeline was built from a different narration",
        ));
    }
    let links = links_for(cfg, chart, text)?;
    let tl = stored_audio(cfg, tdoc);
    let p = problem(cfg, chart, &links, &tl)?;
    Ok(check(&tdoc.to_sequence(), &p))
}

#[derive(Debug, Clone, Default)]
pub struct RenderOptions {
    pub frames: bool,
    pub encode: bool,
    pub encoder_bin: Option<String>,
}

#[derive(Debug, Default)]
pub struct Rendered {
    pub manifest: Option<FrameManifest>,
    pub encoder: Option<EncoderCommand>,
}

fn clear_frames(dir: &Path) -> Result<(), CliError> {
    let Ok(entries) = fs::read_dir(dir) else { return Ok(()) };
    for entry in entries.flatten() {
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if name.starts_with("frame-") && name.ends_with(".svg") {
            fs::remove_file(entry.path()).map_err(|e| CliError::input("render", e.to_string()))?;
        }
    }
    Ok(())
}

/// Writes `preview.html`, and with `frames` the frame snapshots and the
/// encoder descriptor `encode.sh`; with `encode` also runs the encoder.
pub fn render(
    cfg: &SceneConfig,
    chart: &Chart,
    tdoc: &TimelineDocument,
    opts: &RenderOptions,
) -> Result<Rendered, CliError> {
    let page = emit_preview(tdoc, &chart.svg).map_err(|e| CliError::input("render", e.to_string()))?;
    write("render", &cfg.out.join(PREVIEW_FILE), page)?;
    if !opts.frames {
        return Ok(Rendered::default());
    }
    let dir = cfg.out.join(FRAMES_DIR);
    clear_frames(&dir)?;
    let manifest =
        render_frames(tdoc, &chart.svg, cfg.fps, &dir).map_err(|e| CliError::input("render", e.to_string()))?;
    let audio = tdoc.audio.file.as_ref().map(|f| cfg.out.join(f));
    let program = opts.encoder_bin.as_deref().unwrap_or("ffmpeg");
    let cmd = encoder_command(
        &manifest,
        &dir,
        audio.as_deref(),
        tdoc.audio.source == AudioSource::TtsService,
        &cfg.out.join(VIDEO_FILE),
        program,
    )
    .map_err(|e| CliError::input("render", e.to_string()))?;
    let script_path = cfg.out.join(ENCODE_FILE);
    write("render", &script_path, shell_script(&cmd))?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        let _ = fs::set_permissions(&script_path, fs::Permissions::from_mode(0o755));
    }
    if opts.encode {
        run_encoder(&cmd).map_err(|e| CliError::new("encode", ErrorKind::External, e.to_string()))?;
    }
    Ok(Rendered {
        manifest: Some(manifest),
        encoder: Some(cmd),
    })
}

pub fn cmd_tables(cfg: &SceneConfig) -> Result<(), CliError> {
    let chart = load_chart(cfg)?;
    for (t, path) in chart.extraction.tables.iter().zip(write_tables(cfg, &chart)?) {
        println!(
            "table {} ({}): {} rows -> {}",
            t.table_index,
            t.kind.as_str(),
            t.rows.len(),
            path.display()
        );
    }
    Ok(())
}

pub fn cmd_link(cfg: &SceneConfig) -> Result<(), CliError> {
    let chart = load_chart(cfg)?;
    let text = load_text(cfg)?;
    let links = link(cfg, &chart, &text)?;
    print!("{}", serialize_links(links.iter(), &text));
    Ok(())
}

pub fn cmd_schedule(cfg: &SceneConfig, emit_csp: Option<&Path>) -> Result<(), CliError> {
    let chart = load_chart(cfg)?;
    let text = load_text(cfg)?;
    let links = links_for(cfg, &chart, &text)?;
    let s = schedule(cfg, &chart, &text, &links, emit_csp)?;
    report(&s);
    Ok(())
}

fn report(s: &Scheduled) {
    let m = &s.timeline.meta;
    println!(
        "{TIMELINE_FILE}: {} units for {} links{}, at most {} at once",
        m.objective_value,
        s.links,
        if m.optimal { " (minimal)" } else { "" },
        s.peak
    );
}

pub fn cmd_check(cfg: &SceneConfig, timeline: Option<&Path>) -> Result<(), CliError> {
    let chart = load_chart(cfg)?;
    let text = load_text(cfg)?;
    let path = timeline
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.out.join(TIMELINE_FILE));
    let tdoc = load_timeline(&path)?;
    let v = check_timeline(cfg, &chart, &text, &tdoc)?;
    write("check", &cfg.out.join(VIOLATIONS_FILE), violations_text(&v))?;
    if v.is_empty() {
        println!("{}: no violations", path.display());
        return Ok(());
    }
    print!("{}", violations_text(&v));
    Err(CliError::new("check", ErrorKind::Infeasible, count(v.len())))
}

pub fn cmd_render(cfg: &SceneConfig, opts: &RenderOptions) -> Result<(), CliError> {
    let chart = load_chart(cfg)?;
    let path = cfg.out.join(TIMELINE_FILE);
    let tdoc = if path.is_file() {
        load_timeline(&path)?
    } else {
        let text = load_text(cfg)?;
        let links = links_for(cfg, &chart, &text)?;
        schedule(cfg, &chart, &text, &links, None)?.timeline
    };
    let opts = RenderOptions {
        frames: true,
        ..opts.clone()
    };
    let r = render(cfg, &chart, &tdoc, &opts)?;
    if let Some(m) = r.manifest {
        println!("{FRAMES_DIR}/: {} frames at {} fps", m.frames.len(), m.fps);
    }
    Ok(())
}

/// The whole pipeline from fresh: every artifact is rebuilt.
pub fn cmd_generate(cfg: &SceneConfig, emit_csp: Option<&Path>, opts: &RenderOptions) -> Result<(), CliError> {
    let chart = load_chart(cfg)?;
    write_tables(cfg, &chart)?;
    let text = load_text(cfg)?;
    let links = link(cfg, &chart, &text)?;
    let s = schedule(cfg, &chart, &text, &links, emit_csp)?;
    report(&s);
    let r = render(cfg, &chart, &s.timeline, opts)?;
    if let Some(m) = r.manifest {
        println!("{FRAMES_DIR}/: {} frames at {} fps", m.frames.len(), m.fps);
    }
    Ok(())
}
