//! Scene builders, a brute-force optimum and schedule corruptions shared by
//! the scheduler tests and the acceptance suite.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use narrate_core::animation::{default_library, Action, Library};
use narrate_core::chart::{BBox, Canvas, ChartDocument, ElementRole, MarkShape, VisualElement};
use narrate_core::linker::{dedupe_links, LinkOrigin, LinkSet, TextVisualLink};
use narrate_core::narration::{segment_words, synthesize_mock, AudioTimeline, MockConfig, SegmentSpan};
use narrate_core::scheduler::{
    check, encode, AnimationSequence, AnimationUnit, ConstraintProblem, SchedulerConfig, SolveStats, Tag,
};
use proptest::prelude::*;

#[derive(Debug, Clone)]
pub struct Scene {
    pub doc: ChartDocument,
    pub links: LinkSet,
    pub tl: AudioTimeline,
}

impl Scene {
    pub fn problem(&self) -> ConstraintProblem {
        self.problem_with(&default_library(), &SchedulerConfig::default())
    }

    pub fn problem_with(&self, lib: &Library, cfg: &SchedulerConfig) -> ConstraintProblem {
        encode(&self.doc, &self.links, &self.tl, lib, cfg).expect("scene encodes")
    }
}

pub fn element(id: &str, role: ElementRole, shape: MarkShape, group: Option<&str>) -> VisualElement {
    VisualElement {
        id: id.to_string(),
        role,
        shape,
        bbox: BBox::new(0.0, 0.0, 10.0, 10.0),
        data: Vec::new(),
        group_id: group.map(String::from),
        text: None,
    }
}

pub const NARRATION: &str = "w0 w1 w2 w3. w4 w5 w6 w7 w8. w9 w10 w11 w12 w13.";
pub const WORDS: usize = 14;

/// Builds a scene; links are (first word, last word, element ids).
pub fn scene(elements: Vec<VisualElement>, links: &[(usize, usize, &[&str])]) -> Scene {
    let text = segment_words(NARRATION).unwrap();
    let tl = synthesize_mock(&text, &MockConfig::default());
    let links = links
        .iter()
        .enumerate()
        .map(|(i, (first, last, ids))| {
            let mut l = TextVisualLink::new(
                SegmentSpan::new(*first, *last),
                [narrate_core::chart::RowRef::new(0, i)],
                LinkOrigin::Rules,
            );
            l.element_ids = ids.iter().map(|s| s.to_string()).collect();
            l
        })
        .collect();
    Scene {
        doc: ChartDocument {
            elements,
            canvas: Canvas {
                width: 100.0,
                height: 100.0,
            },
            source_hash: String::new(),
        },
        links: dedupe_links(links),
        tl,
    }
}

const PALETTE: [(ElementRole, MarkShape); 12] = [
    (ElementRole::Mark, MarkShape::Rect),
    (ElementRole::Mark, MarkShape::Arc),
    (ElementRole::Mark, MarkShape::Point),
    (ElementRole::Mark, MarkShape::LinePath),
    (ElementRole::AxisLabel, MarkShape::Text),
    (ElementRole::LegendSymbol, MarkShape::Rect),
    (ElementRole::LegendLabel, MarkShape::Text),
    (ElementRole::AnnotationText, MarkShape::Text),
    (ElementRole::AnnotationShape, MarkShape::Rule),
    (ElementRole::Axis, MarkShape::Rule),
    (ElementRole::Title, MarkShape::Text),
    (ElementRole::Background, MarkShape::Rect),
];

/// Up to 6 elements and 3 links over the fixed 14-word narration.
pub fn arb_scene() -> impl Strategy<Value = Scene> {
    let elements = proptest::collection::vec(
        (
            0..PALETTE.len(),
            prop_oneof![Just(None), Just(Some("g0")), Just(Some("g1"))],
        ),
        1..=6,
    );
    elements
        .prop_flat_map(|els| {
            let n = els.len();
            let links = proptest::collection::vec(
                (0..WORDS, 0usize..3, proptest::collection::btree_set(0..n, 1..=2.min(n))),
                0..=3,
            );
            (Just(els), links)
        })
        .prop_map(|(els, links)| {
            let elements: Vec<VisualElement> = els
                .iter()
                .enumerate()
                .map(|(i, (k, g))| {
                    let (role, shape) = PALETTE[*k];
                    element(&format!("e{i}"), role, shape, *g)
                })
                .collect();
            let ids: Vec<String> = elements.iter().map(|e| e.id.clone()).collect();
            let specs: Vec<(usize, usize, Vec<&str>)> = links
                .iter()
                .map(|(first, len, picks)| {
                    let last = (first + len).min(WORDS - 1);
                    (*first, last, picks.iter().map(|&i| ids[i].as_str()).collect())
                })
                .collect();
            let borrowed: Vec<(usize, usize, &[&str])> = specs.iter().map(|(a, b, c)| (*a, *b, c.as_slice())).collect();
            scene(elements, &borrowed)
        })
}

/// Group of a link computed from the scene, not from the problem.
fn link_group(scene: &Scene, link: &TextVisualLink) -> BTreeSet<String> {
    let groups: BTreeSet<&str> = scene
        .doc
        .elements
        .iter()
        .filter(|e| link.element_ids.contains(&e.id))
        .filter_map(|e| e.group_id.as_deref())
        .collect();
    scene
        .doc
        .elements
        .iter()
        .filter(|e| link.element_ids.contains(&e.id) || e.group_id.as_deref().is_some_and(|g| groups.contains(g)))
        .map(|e| e.id.clone())
        .collect()
}

fn span_ms(scene: &Scene, span: SegmentSpan) -> (u64, u64) {
    let a = scene.tl.timings[span.first_word];
    let b = scene.tl.timings[span.last_word];
    (a.start, b.start + b.duration - a.start)
}

/// Every candidate unit list for one link: any action, any preset or
/// per-class effects drawn from the library, both candidate durations.
fn link_candidates(scene: &Scene, lib: &Library, cfg: &SchedulerConfig, index: usize) -> Vec<Vec<AnimationUnit>> {
    let link = &scene.links.links[index];
    let group = link_group(scene, link);
    let (start, span) = span_ms(scene, link.span);
    let mut classes: BTreeMap<(ElementRole, MarkShape), Vec<String>> = BTreeMap::new();
    for id in &group {
        let e = scene.doc.element(id).unwrap();
        classes.entry((e.role, e.shape)).or_default().push(id.clone());
    }
    let classes: Vec<_> = classes.into_iter().collect();
    let mut out = Vec::new();
    for action in [Action::Enter, Action::Emphasize, Action::Exit] {
        let mut durations = vec![span, span.max(cfg.min_emphasis_ms)];
        durations.dedup();
        for &duration in &durations {
            let unit = |ids: BTreeMap<String, String>, effect: String| AnimationUnit {
                element_ids: ids.keys().cloned().collect(),
                start,
                duration,
                action,
                effect,
                element_effects: ids,
                link_index: Some(index),
            };
            for preset in &lib.presets {
                let mut ids = BTreeMap::new();
                let mut ok = true;
                for ((role, _), members) in &classes {
                    match preset.per_role_effects.get(role) {
                        Some(e) => {
                            for m in members {
                                ids.insert(m.clone(), e.clone());
                            }
                        }
                        None => ok = false,
                    }
                }
                if ok {
                    out.push(vec![unit(ids, preset.name.clone())]);
                }
            }
            let domains: Vec<Vec<&str>> = classes
                .iter()
                .map(|((role, shape), _)| lib.effects_for(*shape, *role, action))
                .collect();
            let mut picks = vec![Vec::<&str>::new()];
            for d in &domains {
                picks = picks
                    .into_iter()
                    .flat_map(|p| {
                        d.iter().map(move |e| {
                            let mut q = p.clone();
                            q.push(*e);
                            q
                        })
                    })
                    .collect();
            }
            for pick in picks {
                let units = classes
                    .iter()
                    .zip(&pick)
                    .map(|((_, members), e)| {
                        unit(
                            members.iter().map(|m| (m.clone(), e.to_string())).collect(),
                            e.to_string(),
                        )
                    })
                    .collect();
                out.push(units);
            }
        }
    }
    out
}

/// Minimum unit count over the whole assignment space, judged by `check`.
pub fn brute_force_min(scene: &Scene, p: &ConstraintProblem) -> Option<usize> {
    let lib = &p.library;
    let n = scene.links.len();
    // Keep candidates that pass their own link's constraints.
    let per_link: Vec<Vec<Vec<AnimationUnit>>> = (0..n)
        .map(|i| {
            let mut local = p.clone();
            local
                .constraints
                .retain(|c| matches!(c.subject, narrate_core::scheduler::Subject::Link { index } if index == i));
            link_candidates(scene, lib, &p.config, i)
                .into_iter()
                .filter(|units| check(&sequence(units.clone()), &local).is_empty())
                .collect()
        })
        .collect();
    let mut best: Option<usize> = None;
    let mut idx = vec![0usize; n];
    if per_link.iter().any(|c| c.is_empty()) {
        return None;
    }
    loop {
        let units: Vec<AnimationUnit> = idx
            .iter()
            .enumerate()
            .flat_map(|(i, &k)| per_link[i][k].clone())
            .collect();
        if best.is_none_or(|b| units.len() < b) && check(&sequence(units.clone()), p).is_empty() {
            best = Some(units.len());
        }
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            idx[i] += 1;
            if idx[i] < per_link[i].len() {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

pub fn sequence(units: Vec<AnimationUnit>) -> AnimationSequence {
    AnimationSequence::new(units, SolveStats::default())
}

/// The template used for corruption tests: an unlinked axis, two bars, and
/// a legend label sharing a data group with the first bar.
pub fn rich_scene(first: (usize, usize), second: (usize, usize), with_title: bool, third: Option<usize>) -> Scene {
    let mut elements = vec![
        element("axis", ElementRole::Axis, MarkShape::Rule, None),
        element("r0", ElementRole::Mark, MarkShape::Rect, Some("g0")),
        element("r1", ElementRole::Mark, MarkShape::Rect, None),
        element("l0", ElementRole::LegendLabel, MarkShape::Text, Some("g0")),
    ];
    if with_title {
        elements.push(element("title", ElementRole::Title, MarkShape::Text, None));
    }
    let mut links: Vec<(usize, usize, &[&str])> = vec![(first.0, first.1, &["r0"]), (second.0, second.1, &["r1"])];
    if let Some(w) = third {
        links.push((w, w, &["r1"]));
    }
    scene(elements, &links)
}

pub fn arb_rich_scene() -> impl Strategy<Value = Scene> {
    (
        0usize..4,
        0usize..2,
        5usize..9,
        0usize..2,
        any::<bool>(),
        proptest::option::of(10usize..14),
    )
        .prop_map(|(a, la, b, lb, title, third)| rich_scene((a, a + la), (b, b + lb), title, third))
}

fn link_units(seq: &AnimationSequence, link: usize) -> Vec<AnimationUnit> {
    seq.units
        .iter()
        .filter(|u| u.link_index == Some(link))
        .cloned()
        .collect()
}

fn one(id: &str, effect: &str) -> (BTreeSet<String>, BTreeMap<String, String>) {
    (
        BTreeSet::from([id.to_string()]),
        BTreeMap::from([(id.to_string(), effect.to_string())]),
    )
}

/// One corrupted copy of a solved rich-scene schedule per constraint tag.
pub fn mutants(seq: &AnimationSequence, p: &ConstraintProblem) -> Vec<(Tag, AnimationSequence)> {
    let base = seq.units.clone();
    let mut out = Vec::new();
    let rebuild = |units: Vec<AnimationUnit>| sequence(units);
    let r1_enter = base
        .iter()
        .find(|u| u.element_ids.contains("r1") && u.action == Action::Enter)
        .expect("r1 enters")
        .clone();
    let link0 = link_units(seq, 0);

    // linking: animate the unlinked axis.
    let mut u = base.clone();
    let (ids, eff) = one("axis", "shine");
    u.push(AnimationUnit {
        element_ids: ids,
        element_effects: eff,
        effect: "shine".into(),
        action: Action::Emphasize,
        link_index: None,
        ..link0[0].clone()
    });
    out.push((Tag::Linking, rebuild(u)));

    // integrity: drop link 0 entirely.
    out.push((
        Tag::Integrity,
        rebuild(base.iter().filter(|u| u.link_index != Some(0)).cloned().collect()),
    ));

    // group: drop the legend label from link 0.
    let mut u = base.clone();
    for unit in u.iter_mut().filter(|u| u.link_index == Some(0)) {
        unit.element_ids.remove("l0");
        unit.element_effects.remove("l0");
    }
    u.retain(|u| !u.element_ids.is_empty());
    out.push((Tag::Group, rebuild(u)));

    // association: link 0 also targets the other link's bar.
    let mut u = base.clone();
    let target = u
        .iter_mut()
        .find(|u| u.link_index == Some(0) && u.element_ids.contains("r0"))
        .unwrap();
    target.element_ids.insert("r1".into());
    let e = target.element_effects["r0"].clone();
    target.element_effects.insert("r1".into(), e);
    out.push((Tag::Association, rebuild(u)));

    // consistency: the second bar switches effect.
    let mut u = base.clone();
    let target = u.iter_mut().find(|x| **x == r1_enter).unwrap();
    let other = if r1_enter.element_effects["r1"] == "grow" {
        "fade-in"
    } else {
        "grow"
    };
    target.element_effects.insert("r1".into(), other.into());
    if p.library.preset(&target.effect).is_none() {
        target.effect = other.into();
    }
    out.push((Tag::Consistency, rebuild(u)));

    // duration: one unit starts a millisecond late.
    let mut u = base.clone();
    u[0].start += 1;
    out.push((Tag::Duration, rebuild(u)));

    // conflict: an emphasis at the same instant as the enter.
    let mut u = base.clone();
    let mut twin = r1_enter.clone();
    twin.action = Action::Emphasize;
    twin.effect = "shine".into();
    twin.element_effects = twin
        .element_ids
        .iter()
        .map(|id| (id.clone(), "shine".to_string()))
        .collect();
    u.push(twin);
    out.push((Tag::Conflict, rebuild(u)));

    // on_screen: emphasis before the enter has finished.
    let mut u = base.clone();
    let (ids, eff) = one("r1", "shine");
    u.push(AnimationUnit {
        element_ids: ids,
        element_effects: eff,
        effect: "shine".into(),
        action: Action::Emphasize,
        start: r1_enter.start + 1,
        duration: 10,
        link_index: r1_enter.link_index,
    });
    out.push((Tag::OnScreen, rebuild(u)));

    // order: the axis enters after a mark.
    let mut u = base.clone();
    let first_mark = base
        .iter()
        .filter(|u| u.action == Action::Enter)
        .map(|u| u.start)
        .min()
        .unwrap();
    let (ids, eff) = one("axis", "fade-in");
    u.push(AnimationUnit {
        element_ids: ids,
        element_effects: eff,
        effect: "fade-in".into(),
        action: Action::Enter,
        start: first_mark + 1,
        duration: 100,
        link_index: Some(0),
    });
    out.push((Tag::Order, rebuild(u)));

    // synchronization: a copy of a link-0 unit one millisecond later.
    let mut u = base.clone();
    let mut late = link0[0].clone();
    late.start += 1;
    u.push(late);
    out.push((Tag::Synchronization, rebuild(u)));

    // semantic: an exit effect on an enter unit.
    let mut u = base.clone();
    let target = u.iter_mut().find(|x| **x == r1_enter).unwrap();
    target.effect = "fade-out".into();
    target.element_effects = target
        .element_ids
        .iter()
        .map(|id| (id.clone(), "fade-out".to_string()))
        .collect();
    out.push((Tag::Semantic, rebuild(u)));

    out
}

pub fn fixture_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

pub fn fixture_bytes(name: &str) -> Vec<u8> {
    std::fs::read(fixture_path(name)).unwrap_or_else(|e| panic!("fixture {name}: {e}"))
}

/// Every stage of the offline pipeline on one fixture: rule linker, mock
/// speech, default library and scheduler settings.
pub struct Staged {
    pub svg: Vec<u8>,
    pub doc: ChartDocument,
    pub extraction: narrate_core::chart::Extraction,
    pub text: narrate_core::narration::NarrationText,
    pub tl: AudioTimeline,
    pub links: LinkSet,
    pub problem: ConstraintProblem,
}

pub fn stage_fixture(stem: &str) -> Staged {
    let svg = fixture_bytes(&format!("{stem}.svg"));
    let narration = String::from_utf8(fixture_bytes(&format!("{stem}.txt"))).unwrap();
    let doc = narrate_core::chart::parse_document(&svg).unwrap();
    let extraction = narrate_core::chart::extract_tables(&doc).unwrap();
    let text = segment_words(&narration).unwrap();
    let tl = synthesize_mock(&text, &MockConfig::default());
    let raw = narrate_core::linker::link_rules(&extraction.tables, &text);
    let links = narrate_core::linker::resolve_elements(&dedupe_links(raw), &extraction.map)
        .unwrap()
        .links;
    let problem = encode(&doc, &links, &tl, &default_library(), &SchedulerConfig::default()).unwrap();
    Staged {
        svg,
        doc,
        extraction,
        text,
        tl,
        links,
        problem,
    }
}
