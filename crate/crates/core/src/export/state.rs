use std::f64::consts::PI;

use serde::Serialize;

use crate::animation::{Action, Render};
use crate::narration::Millis;

use super::{ExportError, TimelineDocument, Track};

/// What an element looks like at one instant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElementState {
    pub visible: bool,
    pub opacity: f64,
    /// Geometric progress: the scale applied by grow, wipe, wheel and zoom.
    pub progress: f64,
    /// Translation in px.
    pub dx: f64,
    pub dy: f64,
    pub color: Option<String>,
    /// Effect currently playing, or the last one that completed.
    pub effect: Option<String>,
    pub render: Option<Render>,
}

impl ElementState {
    fn at_rest(visible: bool) -> Self {
        ElementState {
            visible,
            opacity: 1.0,
            progress: 1.0,
            dx: 0.0,
            dy: 0.0,
            color: None,
            effect: None,
            render: None,
        }
    }
}

fn param(tdoc: &TimelineDocument, track: &Track, effect: &str, name: &str, default: f64) -> f64 {
    let own = (track.effect == effect).then(|| track.params.get(name)).flatten();
    own.or_else(|| tdoc.effects.get(effect).and_then(|e| e.params.get(name)))
        .copied()
        .unwrap_or(default)
}

/// Applies `track`'s effect on `id` at raw progress `raw` in [0, 1].
fn apply(tdoc: &TimelineDocument, track: &Track, id: &str, raw: f64, s: &mut ElementState) {
    let Some(effect) = track.element_effects.get(id) else {
        return;
    };
    let Some(spec) = tdoc.effects.get(effect) else { return };
    let p = raw.clamp(0.0, 1.0).powf(param(tdoc, track, effect, "ease", 1.0));
    let q = if track.action == Action::Exit { 1.0 - p } else { p };
    s.effect = Some(effect.clone());
    s.render = Some(spec.render);
    match spec.render {
        Render::Fade => s.opacity = q,
        Render::Grow | Render::Wipe | Render::Wheel | Render::Zoom => {
            s.progress = q;
            s.opacity = 1.0;
        }
        Render::Fly => {
            s.dx = -(1.0 - q) * param(tdoc, track, effect, "distance", 40.0);
            s.opacity = 1.0;
        }
        Render::Shine => s.opacity = 1.0 - param(tdoc, track, effect, "dip", 0.5) * (PI * p).sin(),
        Render::Recolor => s.color = Some(tdoc.meta.highlight_color.clone()),
        Render::Bounce => s.dy = -param(tdoc, track, effect, "height", 12.0) * (PI * p).sin(),
    }
}

fn touching<'a>(tdoc: &'a TimelineDocument, id: &'a str) -> impl Iterator<Item = (usize, &'a Track)> + 'a {
    tdoc.tracks
        .iter()
        .enumerate()
        .filter(move |(_, t)| t.element_ids.iter().any(|e| e == id))
}

/// State of `id` at `t`. Inside a unit the effect is drawn at its progress;
/// between units the final frame of the latest completed unit is held.
pub fn element_state(tdoc: &TimelineDocument, id: &str, t: Millis) -> Result<ElementState, ExportError> {
    let vis = tdoc
        .on_screen
        .get(id)
        .ok_or_else(|| ExportError::UnknownElement(id.to_string()))?;
    let mut s = ElementState::at_rest(vis.at(t));
    let mut active = None;
    for (_, track) in touching(tdoc, id) {
        if track.start > t {
            continue;
        }
        if t >= track.end() {
            apply(tdoc, track, id, 1.0, &mut s);
        } else {
            active = Some(track);
        }
    }
    if let Some(track) = active {
        let raw = (t - track.start) as f64 / track.duration as f64;
        apply(tdoc, track, id, raw, &mut s);
        s.visible = true;
    }
    if !s.visible {
        s.opacity = 0.0;
    }
    Ok(s)
}

/// The last frame of track `index` on `id`, given every track on `id` that
/// started no later: what the retention rule must hold once it ends.
pub fn end_state(tdoc: &TimelineDocument, id: &str, index: usize) -> Result<ElementState, ExportError> {
    let track = tdoc
        .tracks
        .get(index)
        .filter(|t| t.element_ids.iter().any(|e| e == id))
        .ok_or_else(|| ExportError::UnknownElement(id.to_string()))?;
    let vis = tdoc
        .on_screen
        .get(id)
        .ok_or_else(|| ExportError::UnknownElement(id.to_string()))?;
    let mut s = ElementState::at_rest(vis.at(track.end()));
    for (i, other) in touching(tdoc, id) {
        if i != index && other.start <= track.start {
            apply(tdoc, other, id, 1.0, &mut s);
        }
    }
    apply(tdoc, track, id, 1.0, &mut s);
    if !s.visible {
        s.opacity = 0.0;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::animation::default_library;
    use crate::export::{Audio, EffectRender, Meta};
    use crate::narration::AudioSource;
    use crate::scheduler::{Flip, Visibility};
    use std::collections::BTreeMap;

    fn doc(tracks: Vec<Track>) -> TimelineDocument {
        let lib = default_library();
        let effects = lib
            .effects
            .iter()
            .map(|e| {
                (
                    e.name.clone(),
                    EffectRender {
                        action: e.action,
                        render: e.render,
                        params: e.params.iter().map(|p| (p.name.clone(), p.default)).collect(),
                    },
                )
            })
            .collect();
        let mut flips = Vec::new();
        for t in &tracks {
            match t.action {
                Action::Enter => flips.push(Flip {
                    t: t.end(),
                    visible: true,
                }),
                Action::Exit => flips.push(Flip {
                    t: t.end(),
                    visible: false,
                }),
                Action::Emphasize => {}
            }
        }
        let initial = !tracks.iter().any(|t| t.action == Action::Enter);
        TimelineDocument {
            meta: Meta {
                tool: "narrate".into(),
                version: "0".into(),
                source_hash: String::new(),
                config_digest: String::new(),
                highlight_color: lib.highlight_color.clone(),
                objective_value: tracks.len(),
                optimal: true,
            },
            audio: Audio {
                source: AudioSource::Mock,
                total: 10_000,
                file: None,
                words: Vec::new(),
            },
            effects,
            on_screen: BTreeMap::from([("a".to_string(), Visibility { initial, flips })]),
            tracks,
        }
    }

    fn track(action: Action, effect: &str, start: Millis, duration: Millis) -> Track {
        Track {
            element_ids: vec!["a".into()],
            action,
            effect: effect.into(),
            start,
            duration,
            params: BTreeMap::new(),
            element_effects: BTreeMap::from([("a".to_string(), effect.to_string())]),
            link_index: Some(0),
        }
    }

    #[test]
    fn fade_in_midpoint_is_half_opaque() {
        let d = doc(vec![track(Action::Enter, "fade-in", 1000, 400)]);
        let s = element_state(&d, "a", 1200).unwrap();
        assert!(s.visible);
        assert!((s.opacity - 0.5).abs() < 1e-12);
    }

    #[test]
    fn hidden_before_enter() {
        let d = doc(vec![track(Action::Enter, "grow", 1000, 400)]);
        let s = element_state(&d, "a", 999).unwrap();
        assert!(!s.visible);
        assert_eq!(s.opacity, 0.0);
    }

    #[test]
    fn grow_progress_is_held_after_the_unit() {
        let d = doc(vec![
            track(Action::Enter, "grow", 1000, 400),
            track(Action::Emphasize, "shine", 3000, 500),
        ]);
        for t in [1400, 2000, 2999] {
            let s = element_state(&d, "a", t).unwrap();
            assert_eq!(s.progress, 1.0);
            assert_eq!(s.effect.as_deref(), Some("grow"));
        }
        assert!((element_state(&d, "a", 1100).unwrap().progress - 0.25).abs() < 1e-12);
    }

    #[test]
    fn change_color_stays_after_the_unit() {
        let d = doc(vec![track(Action::Emphasize, "change-color", 100, 500)]);
        assert_eq!(element_state(&d, "a", 50).unwrap().color, None);
        let hl = Some(d.meta.highlight_color.clone());
        assert_eq!(element_state(&d, "a", 300).unwrap().color, hl);
        assert_eq!(element_state(&d, "a", 5000).unwrap().color, hl);
    }

    #[test]
    fn exit_ends_invisible() {
        let d = doc(vec![
            track(Action::Enter, "fade-in", 0, 100),
            track(Action::Exit, "fade-out", 500, 100),
        ]);
        assert!((element_state(&d, "a", 550).unwrap().opacity - 0.5).abs() < 1e-12);
        let after = element_state(&d, "a", 600).unwrap();
        assert!(!after.visible);
        assert_eq!(after, end_state(&d, "a", 1).unwrap());
    }

    #[test]
    fn unknown_element() {
        let d = doc(Vec::new());
        assert!(matches!(
            element_state(&d, "zz", 0),
            Err(ExportError::UnknownElement(_))
        ));
    }

    #[test]
    fn ease_param_bends_progress() {
        let mut t = track(Action::Enter, "fade-in", 0, 100);
        t.params.insert("ease".into(), 2.0);
        let d = doc(vec![t]);
        assert!((element_state(&d, "a", 50).unwrap().opacity - 0.25).abs() < 1e-12);
    }

    #[test]
    fn no_pops_at_unit_ends() {
        let d = doc(vec![
            track(Action::Enter, "wipe", 0, 300),
            track(Action::Emphasize, "bounce", 400, 500),
            track(Action::Emphasize, "shine", 1000, 500),
        ]);
        for (i, tr) in d.tracks.iter().enumerate() {
            let end = end_state(&d, "a", i).unwrap();
            assert_eq!(element_state(&d, "a", tr.end()).unwrap(), end);
            let before = element_state(&d, "a", tr.end() - 1).unwrap();
            assert!((before.opacity - end.opacity).abs() < 0.02);
            assert!((before.progress - end.progress).abs() < 0.01);
            assert!((before.dy - end.dy).abs() < 0.1);
        }
    }
}
