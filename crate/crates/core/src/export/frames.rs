use std::collections::HashMap;
use std::fs;
use std::path::Path;

use quick_xml::events::{BytesStart, Event};
use quick_xml::{Reader, Writer, XmlVersion};
use serde::{Deserialize, Serialize};

use crate::animation::Render;
use crate::chart::{parse_anchored, MarkShape, VisualElement};
use crate::narration::Millis;

use super::state::{element_state, ElementState};
use super::{ExportError, TimelineDocument};

pub const FRAMES_MANIFEST: &str = "manifest.json";
pub const FRAME_PATTERN: &str = "frame-%06d.svg";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub index: usize,
    pub t: Millis,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameManifest {
    pub fps: u32,
    pub width: f64,
    pub height: f64,
    pub total: Millis,
    pub pattern: String,
    pub frames: Vec<FrameEntry>,
}

struct Target<'a> {
    element: &'a VisualElement,
    parent_offset: (f64, f64),
}

struct Prepared<'a> {
    svg: &'a [u8],
    targets: HashMap<usize, Target<'a>>,
}

fn frame_times(total: Millis, fps: u32) -> Vec<Millis> {
    let fps = u64::from(fps);
    let count = (total * fps).div_ceil(1000).max(1);
    (0..count).map(|i| i * 1000 / fps).collect()
}

fn num(x: f64) -> String {
    let s = format!("{x:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn transform_for(state: &ElementState, target: &Target<'_>) -> Option<String> {
    let b = target.element.bbox;
    let (ox, oy) = target.parent_offset;
    let (cx, cy) = b.center();
    let s = state.progress;
    let scaled = match state.render {
        Some(Render::Grow) => Some(((cx, b.bottom()), (1.0, s))),
        Some(Render::Wipe) => Some(((b.x, cy), (s, 1.0))),
        Some(Render::Wheel | Render::Zoom) => Some(((cx, cy), (s, s))),
        _ => None,
    }
    .filter(|_| s != 1.0);
    let moved = state.dx != 0.0 || state.dy != 0.0;
    match scaled {
        Some(((px, py), (sx, sy))) => {
            let (px, py) = (px - ox, py - oy);
            Some(format!(
                "translate({} {}) scale({} {}) translate({} {})",
                num(px + state.dx),
                num(py + state.dy),
                num(sx),
                num(sy),
                num(-px),
                num(-py)
            ))
        }
        None if moved => Some(format!("translate({} {})", num(state.dx), num(state.dy))),
        None => None,
    }
}

fn rewrite(start: &BytesStart<'_>, state: &ElementState, target: &Target<'_>) -> BytesStart<'static> {
    let name = start.name().as_ref().to_string();
    let paint = match target.element.shape {
        MarkShape::LinePath | MarkShape::Rule => "stroke",
        _ => "fill",
    };
    let transform = transform_for(state, target);
    let mut out = BytesStart::new(name);
    let mut old_transform = None;
    for attr in start.attributes().flatten() {
        let key = attr.key.as_ref();
        let Ok(value) = attr.normalized_value(XmlVersion::Implicit1_0) else {
            continue;
        };
        let replaced = key == "display" || key == "opacity" || (state.color.is_some() && key == paint);
        if key == "transform" {
            old_transform = Some(value.into_owned());
        } else if !replaced {
            out.push_attribute((key, value.as_ref()));
        }
    }
    let transform = match (transform, old_transform) {
        (Some(t), Some(old)) => Some(format!("{t} {old}")),
        (t, old) => t.or(old),
    };
    if let Some(t) = transform {
        out.push_attribute(("transform", t.as_str()));
    }
    if !state.visible {
        out.push_attribute(("display", "none"));
    } else if state.opacity < 1.0 {
        out.push_attribute(("opacity", num(state.opacity).as_str()));
    }
    if let Some(color) = &state.color {
        out.push_attribute((paint, color.as_str()));
    }
    out
}

fn prepare<'a>(
    tdoc: &TimelineDocument,
    svg: &'a [u8],
    doc: &'a crate::chart::ChartDocument,
    anchors: &[crate::chart::Anchor],
) -> Result<Prepared<'a>, ExportError> {
    if doc.source_hash != tdoc.meta.source_hash {
        return Err(ExportError::SourceMismatch {
            expected: tdoc.meta.source_hash.clone(),
            found: doc.source_hash.clone(),
        });
    }
    let by_id: HashMap<&str, &VisualElement> = doc.elements.iter().map(|e| (e.id.as_str(), e)).collect();
    let targets = anchors
        .iter()
        .filter_map(|a| {
            let element = by_id.get(a.id.as_str())?;
            Some((
                a.order,
                Target {
                    element,
                    parent_offset: a.parent_offset,
                },
            ))
        })
        .collect();
    Ok(Prepared { svg, targets })
}

fn draw(tdoc: &TimelineDocument, p: &Prepared<'_>, t: Millis) -> Result<Vec<u8>, ExportError> {
    let mut reader = Reader::from_reader(p.svg);
    let mut writer = Writer::new(Vec::with_capacity(p.svg.len()));
    let mut order = 0;
    let mut buf = Vec::new();
    let io = |e: std::io::Error| ExportError::io("<frame>", e);
    loop {
        let event = reader.read_event_into(&mut buf).map_err(|e| {
            ExportError::Chart(crate::chart::ChartError::MalformedSvg {
                position: reader.error_position(),
                message: e.to_string(),
            })
        })?;
        match event {
            Event::Eof => break,
            Event::Start(start) => {
                let out = restyle(tdoc, p, order, start, t)?;
                order += 1;
                writer.write_event(Event::Start(out)).map_err(io)?;
            }
            Event::Empty(start) => {
                let out = restyle(tdoc, p, order, start, t)?;
                order += 1;
                writer.write_event(Event::Empty(out)).map_err(io)?;
            }
            other => writer.write_event(other).map_err(io)?,
        }
        buf.clear();
    }
    Ok(writer.into_inner())
}

fn restyle<'b>(
    tdoc: &TimelineDocument,
    p: &Prepared<'_>,
    order: usize,
    start: BytesStart<'b>,
    t: Millis,
) -> Result<BytesStart<'b>, ExportError> {
    match p.targets.get(&order) {
        Some(target) => {
            let state = element_state(tdoc, &target.element.id, t)?;
            Ok(rewrite(&start, &state, target))
        }
        None => Ok(start),
    }
}

/// One snapshot of `svg` at `t`. Pure in its inputs.
pub fn render_frame(tdoc: &TimelineDocument, svg: &[u8], t: Millis) -> Result<Vec<u8>, ExportError> {
    let (doc, anchors) = parse_anchored(svg)?;
    let p = prepare(tdoc, svg, &doc, &anchors)?;
    draw(tdoc, &p, t)
}

/// Writes `frame-%06d.svg` files and `manifest.json` into `dir`.
pub fn render_frames(tdoc: &TimelineDocument, svg: &[u8], fps: u32, dir: &Path) -> Result<FrameManifest, ExportError> {
    if !(1..=60).contains(&fps) {
        return Err(ExportError::InvalidFps(fps));
    }
    let (doc, anchors) = parse_anchored(svg)?;
    let p = prepare(tdoc, svg, &doc, &anchors)?;
    fs::create_dir_all(dir).map_err(|e| ExportError::io(dir, e))?;

    let frames: Vec<FrameEntry> = frame_times(tdoc.audio.total, fps)
        .into_iter()
        .enumerate()
        .map(|(index, t)| FrameEntry {
            index,
            t,
            file: format!("frame-{index:06}.svg"),
        })
        .collect();

    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(frames.len());
    let chunk = frames.len().div_ceil(workers.max(1));
    std::thread::scope(|scope| {
        let handles: Vec<_> = frames
            .chunks(chunk.max(1))
            .map(|part| {
                let p = &p;
                scope.spawn(move || -> Result<(), ExportError> {
                    for f in part {
                        let bytes = draw(tdoc, p, f.t)?;
                        let path = dir.join(&f.file);
                        fs::write(&path, bytes).map_err(|e| ExportError::io(path, e))?;
                    }
                    Ok(())
                })
            })
            .collect();
        handles
            .into_iter()
            .try_for_each(|h| h.join().expect("frame worker panicked"))
    })?;

    let manifest = FrameManifest {
        fps,
        width: doc.canvas.width,
        height: doc.canvas.height,
        total: tdoc.audio.total,
        pattern: FRAME_PATTERN.into(),
        frames,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    let path = dir.join(FRAMES_MANIFEST);
    fs::write(&path, bytes).map_err(|e| ExportError::io(path, e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_second_at_ten_fps_is_ten_frames() {
        let t = frame_times(1000, 10);
        assert_eq!(t.len(), 10);
        assert_eq!(t[9], 900);
        assert_eq!(frame_times(1001, 10).len(), 11);
        assert_eq!(frame_times(0, 24), [0]);
        assert_eq!(frame_times(1000, 3), [0, 333, 666]);
    }

    #[test]
    fn numbers_are_short() {
        assert_eq!(num(1.0), "1");
        assert_eq!(num(0.25), "0.25");
        assert_eq!(num(-0.0001), "0");
        assert_eq!(num(2.0 / 3.0), "0.667");
    }
}
