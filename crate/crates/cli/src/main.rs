use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use narrate_cli::{
    cmd_check, cmd_generate, cmd_link, cmd_render, cmd_schedule, cmd_tables, CliError, LinkerBackend, RenderOptions,
    SceneConfig, SceneFile, TtsBackend,
};

/// Turn an annotated SVG chart and a narration script into a narrated,
/// animated data video.
#[derive(Parser)]
#[command(name = "narrate", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run every stage and write all artifacts.
    Generate {
        #[command(flatten)]
        scene: SceneArgs,
        #[command(flatten)]
        render: RenderArgs,
        /// Also write the constraint problem here.
        #[arg(long)]
        emit_csp: Option<PathBuf>,
        /// Render frame snapshots and the encoder descriptor.
        #[arg(long)]
        frames: bool,
        /// Scenes processed at once when several configs are given.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Dump the extracted data tables as CSV.
    Tables {
        #[command(flatten)]
        scene: SceneArgs,
    },
    /// Link narration segments to table rows and print the links.
    Link {
        #[command(flatten)]
        scene: SceneArgs,
    },
    /// Schedule the animations and write timeline.json.
    Schedule {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long)]
        emit_csp: Option<PathBuf>,
    },
    /// Re-check a timeline against the scene's constraints.
    Check {
        #[command(flatten)]
        scene: SceneArgs,
        /// Timeline to check; defaults to timeline.json in the output dir.
        #[arg(long)]
        timeline: Option<PathBuf>,
    },
    /// Write the preview page, frames and encoder descriptor.
    Render {
        #[command(flatten)]
        scene: SceneArgs,
        #[command(flatten)]
        render: RenderArgs,
    },
}

#[derive(Args)]
struct SceneArgs {
    /// Scene file (scene.json); repeatable for `generate`. Flags win.
    #[arg(long)]
    config: Vec<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long)]
    narration: Option<PathBuf>,
    #[arg(long, value_enum)]
    linker: Option<LinkerBackend>,
    #[arg(long, value_enum)]
    tts: Option<TtsBackend>,
    #[arg(long)]
    voice: Option<String>,
    /// Animation library file replacing the built-in one.
    #[arg(long)]
    library: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    max_nodes: Option<u64>,
    #[arg(long)]
    max_time_ms: Option<u64>,
    #[arg(long)]
    fps: Option<u32>,
    /// Drop the role-order constraints.
    #[arg(long)]
    no_role_order: bool,
    #[arg(long)]
    min_emphasis_ms: Option<u64>,
    /// Color used by change-color emphasis.
    #[arg(long)]
    highlight: Option<String>,
    /// Use a recorded model reply instead of calling the LLM service.
    #[arg(long)]
    llm_replay: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    /// Run the encoder after writing encode.sh.
    #[arg(long)]
    encode: bool,
    #[arg(long)]
    encoder_bin: Option<String>,
}

impl RenderArgs {
    fn options(&self, frames: bool) -> RenderOptions {
        RenderOptions {
            frames: frames || self.encode,
            encode: self.encode,
            encoder_bin: self.encoder_bin.clone(),
        }
    }
}

impl SceneArgs {
    fn flags(&self) -> SceneFile {
        SceneFile {
            svg: self.svg.clone(),
            narration: self.narration.clone(),
            linker: self.linker,
            tts: self.tts,
            voice: self.voice.clone(),
            library: self.library.clone(),
            out: self.out.clone(),
            max_nodes: self.max_nodes,
            max_time_ms: self.max_time_ms,
            fps: self.fps,
            no_role_order: self.no_role_order.then_some(true),
            min_emphasis_ms: self.min_emphasis_ms,
            highlight: self.highlight.clone(),
            llm_replay: self.llm_replay.clone(),
        }
    }

    fn scenes(&self) -> Result<Vec<SceneConfig>, CliError> {
        if self.config.is_empty() {
            return Ok(vec![SceneConfig::resolve(self.flags())?]);
        }
        self.config
            .iter()
            .map(|p| SceneConfig::resolve(SceneFile::load(p)?.overlay(self.flags())))
            .collect()
    }

    fn scene(&self) -> Result<SceneConfig, CliError> {
        let mut s = self.scenes()?;
        if s.len() > 1 {
            return Err(CliError::input(
                "config",
                "only `generate` accepts several --config files",
            ));
        }
        Ok(s.remove(0))
    }
}

/// Runs `f` over every scene with at most `jobs` at a time and returns the
/// first failure in scene order.
fn for_each_scene(
    scenes: &[SceneConfig],
    jobs: usize,
    f: impl Fn(&SceneConfig) -> Result<(), CliError> + Sync,
) -> Result<(), CliError> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, CliError)>> = Mutex::new(Vec::new());
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, scenes.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(scene) = scenes.get(i) else { break };
                if let Err(e) = f(scene) {
                    results.lock().unwrap().push((i, e));
                }
            });
        }
    });
    let mut errors = results.into_inner().unwrap();
    errors.sort_by_key(|(i, _)| *i);
    match errors.into_iter().next() {
        Some((_, e)) => Err(e),
        None => Ok(()),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Generate {
            scene,
            render,
            emit_csp,
            frames,
            jobs,
        } => {
            let scenes = scene.scenes()?;
            if emit_csp.is_some() && scenes.len() > 1 {
                return Err(CliError::input("config", "--emit-csp takes a single scene"));
            }
            let opts = render.options(frames);
            for_each_scene(&scenes, jobs, |cfg| cmd_generate(cfg, emit_csp.as_deref(), &opts))
        }
        Cmd::Tables { scene } => cmd_tables(&scene.scene()?),
        Cmd::Link { scene } => cmd_link(&scene.scene()?),
        Cmd::Schedule { scene, emit_csp } => cmd_schedule(&scene.scene()?, emit_csp.as_deref()),
        Cmd::Check { scene, timeline } => cmd_check(&scene.scene()?, timeline.as_deref()),
        Cmd::Render { scene, render } => cmd_render(&scene.scene()?, &render.options(true)),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("narrate: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
