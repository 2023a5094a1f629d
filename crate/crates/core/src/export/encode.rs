use std::path::Path;
use std::process::Command;

use serde::Serialize;

use super::frames::{FrameManifest, FRAME_PATTERN};
use super::ExportError;

/// An encoder invocation: program plus argument vector. Never run unless
/// asked for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EncoderCommand {
    pub program: String,
    pub args: Vec<String>,
}

fn arg(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

/// Builds the ffmpeg-style argv that turns the frames in `frames_dir` (and
/// the narration audio, when there is one) into `out_path`.
///
/// `audio_required` is set when the narration came from a speech service:
/// its audio file must then exist.
pub fn encoder_command(
    manifest: &FrameManifest,
    frames_dir: &Path,
    audio: Option<&Path>,
    audio_required: bool,
    out_path: &Path,
    program: &str,
) -> Result<EncoderCommand, ExportError> {
    let audio = match audio {
        Some(p) if p.is_file() => Some(p),
        other if audio_required => return Err(ExportError::MissingAudio(other.map(Path::to_path_buf))),
        _ => None,
    };
    let mut args = vec![
        "-y".to_string(),
        "-framerate".to_string(),
        manifest.fps.to_string(),
        "-i".to_string(),
        arg(&frames_dir.join(FRAME_PATTERN)),
    ];
    if let Some(a) = audio {
        args.extend(["-i".to_string(), arg(a), "-c:a".to_string(), "aac".to_string()]);
    }
    args.extend(["-pix_fmt".to_string(), "yuv420p".to_string(), arg(out_path)]);
    Ok(EncoderCommand {
        program: program.to_string(),
        args,
    })
}

fn quote(s: &str) -> String {
    if !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_alphanumeric() || b"-_./%:=+,".contains(&b))
    {
        s.to_string()
    } else {
        format!("'{}'", s.replace('\'', r"'\''"))
    }
}

/// The descriptor as a POSIX shell script.
pub fn shell_script(cmd: &EncoderCommand) -> String {
    let mut line = quote(&cmd.program);
    for a in &cmd.args {
        line.push(' ');
        line.push_str(&quote(a));
    }
    format!("#!/bin/sh\nexec {line}\n")
}

pub fn run_encoder(cmd: &EncoderCommand) -> Result<(), ExportError> {
    let failed = |message: String| ExportError::Encoder {
        program: cmd.program.clone(),
        message,
    };
    let status = Command::new(&cmd.program)
        .args(&cmd.args)
        .status()
        .map_err(|e| failed(e.to_string()))?;
    if status.success() {
        Ok(())
    } else {
        Err(failed(format!("exited with {status}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest() -> FrameManifest {
        FrameManifest {
            fps: 24,
            width: 100.0,
            height: 50.0,
            total: 1000,
            pattern: FRAME_PATTERN.into(),
            frames: Vec::new(),
        }
    }

    #[test]
    fn mock_audio_has_no_audio_input() {
        let c = encoder_command(
            &manifest(),
            Path::new("out/frames"),
            None,
            false,
            Path::new("out/video.mp4"),
            "ffmpeg",
        )
        .unwrap();
        assert_eq!(
            c.args,
            [
                "-y",
                "-framerate",
                "24",
                "-i",
                "out/frames/frame-%06d.svg",
                "-pix_fmt",
                "yuv420p",
                "out/video.mp4"
            ]
        );
    }

    #[test]
    fn service_audio_is_required() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("narration.wav");
        let err = encoder_command(
            &manifest(),
            dir.path(),
            Some(&missing),
            true,
            Path::new("v.mp4"),
            "ffmpeg",
        );
        assert!(matches!(err, Err(ExportError::MissingAudio(Some(_)))));
        std::fs::write(&missing, b"RIFF").unwrap();
        let c = encoder_command(
            &manifest(),
            dir.path(),
            Some(&missing),
            true,
            Path::new("v.mp4"),
            "ffmpeg",
        )
        .unwrap();
        let i = c.args.iter().position(|a| *a == arg(&missing)).unwrap();
        assert_eq!(c.args[i - 1], "-i");
    }

    #[test]
    fn script_quotes_awkward_arguments() {
        let c = EncoderCommand {
            program: "ffmpeg".into(),
            args: vec!["a b".into(), "it's".into(), "plain-1.svg".into()],
        };
        assert_eq!(
            shell_script(&c),
            "#!/bin/sh\nexec ffmpeg 'a b' 'it'\\''s' plain-1.svg\n"
        );
    }
}
