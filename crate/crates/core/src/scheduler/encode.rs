use std::collections::{BTreeMap, BTreeSet};

use crate::animation::{Action, Library};
use crate::chart::{ChartDocument, ElementRole, MarkShape};
use crate::linker::LinkSet;
use crate::narration::{span_time, AudioTimeline};

use super::{
    ActionOption, ClassVars, ConstraintInstance, ConstraintProblem, ElementInfo, EncodeError, LinkVars, RankClass,
    SchedulerConfig, Subject, Tag,
};

fn ids(set: &BTreeSet<String>) -> String {
    set.iter().cloned().collect::<Vec<_>>().join(", ")
}

pub fn encode(
    doc: &ChartDocument,
    links: &LinkSet,
    tl: &AudioTimeline,
    lib: &Library,
    cfg: &SchedulerConfig,
) -> Result<ConstraintProblem, EncodeError> {
    let elements: Vec<ElementInfo> = doc
        .elements
        .iter()
        .map(|e| ElementInfo {
            id: e.id.clone(),
            role: e.role,
            shape: e.shape,
            group_id: e.group_id.clone(),
        })
        .collect();
    let by_id: BTreeMap<&str, &ElementInfo> = elements.iter().map(|e| (e.id.as_str(), e)).collect();

    let mut vars = Vec::with_capacity(links.len());
    for (index, link) in links.iter().enumerate() {
        for id in &link.element_ids {
            if !by_id.contains_key(id.as_str()) {
                return Err(EncodeError::UnknownElement {
                    link: index,
                    element: id.clone(),
                });
            }
        }
        let groups: BTreeSet<&str> = link
            .element_ids
            .iter()
            .filter_map(|id| by_id[id.as_str()].group_id.as_deref())
            .collect();
        let group: BTreeSet<String> = elements
            .iter()
            .filter(|e| link.element_ids.contains(&e.id) || e.group_id.as_deref().is_some_and(|g| groups.contains(g)))
            .map(|e| e.id.clone())
            .collect();

        let mut by_class: BTreeMap<(ElementRole, MarkShape), Vec<String>> = BTreeMap::new();
        for id in &group {
            let e = by_id[id.as_str()];
            by_class.entry((e.role, e.shape)).or_default().push(id.clone());
        }
        let classes: Vec<ClassVars> = by_class
            .into_iter()
            .map(|((role, shape), members)| ClassVars {
                role,
                shape,
                members,
                effects: Action::SEARCH_ORDER
                    .iter()
                    .map(|&a| {
                        (
                            a,
                            lib.effects_for(shape, role, a).into_iter().map(String::from).collect(),
                        )
                    })
                    .collect(),
            })
            .collect();

        let (start, span_duration) = span_time(tl, link.span)?;
        let member_classes: Vec<(ElementRole, MarkShape)> = group
            .iter()
            .map(|id| {
                let e = by_id[id.as_str()];
                (e.role, e.shape)
            })
            .collect();
        let presets = lib.matching_presets_for(&member_classes);
        let options: Vec<ActionOption> = Action::SEARCH_ORDER
            .iter()
            .filter_map(|&action| {
                let presets: Vec<String> = presets
                    .iter()
                    .filter(|p| lib.preset_action(p) == action)
                    .map(|p| p.name.clone())
                    .collect();
                let split = classes.iter().all(|c| !c.effects[&action].is_empty());
                let duration = if action == Action::Emphasize {
                    span_duration.max(cfg.min_emphasis_ms)
                } else {
                    span_duration
                };
                (split || !presets.is_empty()).then_some(ActionOption {
                    action,
                    presets,
                    split,
                    duration,
                })
            })
            .collect();
        if options.is_empty() {
            let element = classes
                .iter()
                .find(|c| c.effects.values().all(Vec::is_empty))
                .or(classes.first())
                .map(|c| c.members[0].clone())
                .unwrap_or_default();
            return Err(EncodeError::InfeasibleDomain { link: index, element });
        }

        vars.push(LinkVars {
            index,
            span: link.span,
            element_ids: link.element_ids.clone(),
            group,
            start,
            span_duration,
            classes,
            options,
        });
    }

    let mut constraints = Vec::new();
    let mut push =
        |tag: Tag, subject: Subject, text: String| constraints.push(ConstraintInstance { tag, subject, text });

    let animatable: BTreeSet<&str> = vars.iter().flat_map(|l| l.group.iter().map(String::as_str)).collect();
    if !vars.is_empty() {
        push(
            Tag::Linking,
            Subject::Global,
            format!(
                "units carry a link index and only target linked groups {{{}}}",
                animatable.iter().copied().collect::<Vec<_>>().join(", ")
            ),
        );
    }
    for l in &vars {
        let s = || Subject::Link { index: l.index };
        push(
            Tag::Integrity,
            s(),
            format!(
                "link {} yields at least one unit covering {{{}}}",
                l.index,
                ids(&l.element_ids)
            ),
        );
        push(
            Tag::Group,
            s(),
            format!("units of link {} cover its group {{{}}}", l.index, ids(&l.group)),
        );
        push(
            Tag::Association,
            s(),
            format!("units of link {} target only its group {{{}}}", l.index, ids(&l.group)),
        );
        push(
            Tag::Duration,
            s(),
            format!(
                "units of link {} start at {} and last {} ms (emphasis at least {} ms)",
                l.index, l.start, l.span_duration, cfg.min_emphasis_ms
            ),
        );
        push(
            Tag::Synchronization,
            s(),
            format!("units of link {} share start and action", l.index),
        );
        push(
            Tag::Semantic,
            s(),
            format!(
                "effects of link {} are applicable or come from a matching preset",
                l.index
            ),
        );
    }

    let mut class_links: BTreeMap<(ElementRole, MarkShape), usize> = BTreeMap::new();
    for l in &vars {
        for c in &l.classes {
            *class_links.entry((c.role, c.shape)).or_default() += 1;
        }
    }
    for ((role, shape), n) in class_links {
        if n >= 2 {
            push(
                Tag::Consistency,
                Subject::Class { role, shape },
                format!("{role}/{shape} elements use one effect per action"),
            );
        }
    }

    for e in &elements {
        if animatable.contains(e.id.as_str()) {
            push(
                Tag::Conflict,
                Subject::Element { id: e.id.clone() },
                format!("`{}`: at most one enter, first; at most one exit, last", e.id),
            );
        }
    }
    for e in &elements {
        push(
            Tag::OnScreen,
            Subject::Element { id: e.id.clone() },
            format!("`{}` is visible whenever it is emphasized or exits", e.id),
        );
    }

    if cfg.role_order {
        let present: BTreeSet<RankClass> = elements.iter().map(|e| RankClass::of(e.role)).collect();
        for &before in &present {
            for &after in &present {
                if before.precedes(after) {
                    push(
                        Tag::Order,
                        Subject::RankPair { before, after },
                        format!("{before:?} elements appear no later than {after:?} elements"),
                    );
                }
            }
        }
    }

    let touched: BTreeSet<&str> = elements
        .iter()
        .filter(|e| animatable.contains(e.id.as_str()))
        .filter_map(|e| e.group_id.as_deref())
        .collect();
    let mut groups: BTreeMap<&str, (bool, bool)> = BTreeMap::new();
    for e in &elements {
        if let Some(g) = e.group_id.as_deref().filter(|g| touched.contains(g)) {
            let entry = groups.entry(g).or_default();
            if e.role.is_annotation() {
                entry.0 = true;
            } else {
                entry.1 = true;
            }
        }
    }
    for (g, (annot, other)) in groups {
        if annot && other {
            push(
                Tag::Synchronization,
                Subject::Group { id: g.to_string() },
                format!("annotations of group `{g}` appear no earlier than its other elements"),
            );
        }
    }

    Ok(ConstraintProblem {
        elements,
        links: vars,
        constraints,
        library: lib.clone(),
        config: *cfg,
    })
}
