use std::collections::{BTreeMap, BTreeSet};

use crate::animation::Action;
use crate::chart::{ElementRole, MarkShape};
use crate::narration::Millis;

use super::onscreen::Visibility;
use super::{AnimationSequence, AnimationUnit, ConstraintProblem, LinkVars, RankClass, Subject, Tag, Violation};

/// Evaluates every constraint instance of `p` against `seq`. Empty iff the
/// sequence satisfies them all.
pub fn check(seq: &AnimationSequence, p: &ConstraintProblem) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut fail = |tag: Tag, subject: &Subject, witness: String| {
        out.push(Violation {
            tag,
            subject: subject.to_string(),
            witness,
        })
    };
    if seq.objective_value != seq.units.len() {
        fail(
            Tag::Integrity,
            &Subject::Global,
            format!(
                "objective {} differs from unit count {}",
                seq.objective_value,
                seq.units.len()
            ),
        );
    }
    let units = &seq.units;
    for c in &p.constraints {
        let s = &c.subject;
        match (c.tag, s) {
            (Tag::Linking, Subject::Global) => {
                let linked: BTreeSet<&str> = p
                    .links
                    .iter()
                    .flat_map(|l| l.group.iter().map(String::as_str))
                    .collect();
                for u in units {
                    match u.link_index {
                        Some(i) if i < p.links.len() => {}
                        other => fail(c.tag, s, format!("unit at {} has link index {other:?}", u.start)),
                    }
                    for id in &u.element_ids {
                        if !linked.contains(id.as_str()) {
                            fail(
                                c.tag,
                                s,
                                format!("`{id}` is animated at {} but belongs to no link", u.start),
                            );
                        }
                    }
                }
            }
            (tag, Subject::Link { index }) => {
                let Some(link) = p.links.iter().find(|l| l.index == *index) else {
                    fail(tag, s, "link is not declared".into());
                    continue;
                };
                let mine: Vec<&AnimationUnit> = units.iter().filter(|u| u.link_index == Some(*index)).collect();
                for w in check_link(tag, link, &mine, p) {
                    fail(tag, s, w);
                }
            }
            (Tag::Consistency, Subject::Class { role, shape }) => {
                for w in check_consistency(*role, *shape, units, p) {
                    fail(c.tag, s, w);
                }
            }
            (Tag::Conflict, Subject::Element { id }) => {
                for w in check_conflict(id, units) {
                    fail(c.tag, s, w);
                }
            }
            (Tag::OnScreen, Subject::Element { id }) => {
                for w in check_on_screen(id, units) {
                    fail(c.tag, s, w);
                }
            }
            (Tag::Order, Subject::RankPair { before, after }) => {
                if let Some(w) = check_order(*before, *after, units, p) {
                    fail(c.tag, s, w);
                }
            }
            (Tag::Synchronization, Subject::Group { id }) => {
                if let Some(w) = check_annotations_last(id, units, p) {
                    fail(c.tag, s, w);
                }
            }
            (tag, subject) => fail(tag, subject, "constraint instance has an unexpected subject".into()),
        }
    }
    out
}

fn targets(units: &[&AnimationUnit]) -> BTreeSet<String> {
    units.iter().flat_map(|u| u.element_ids.iter().cloned()).collect()
}

fn list<'a>(ids: impl IntoIterator<Item = &'a String>) -> String {
    ids.into_iter().cloned().collect::<Vec<_>>().join(", ")
}

fn check_link(tag: Tag, link: &LinkVars, mine: &[&AnimationUnit], p: &ConstraintProblem) -> Vec<String> {
    let mut w = Vec::new();
    match tag {
        Tag::Integrity => {
            if mine.is_empty() {
                w.push("no unit animates this link".into());
            } else {
                let covered = targets(mine);
                let missing: Vec<&String> = link.element_ids.difference(&covered).collect();
                if !missing.is_empty() {
                    w.push(format!("linked elements not animated: {}", list(missing)));
                }
            }
        }
        Tag::Group => {
            let covered = targets(mine);
            let missing: Vec<&String> = link.group.difference(&covered).collect();
            if !missing.is_empty() {
                w.push(format!("group members not animated together: {}", list(missing)));
            }
        }
        Tag::Association => {
            let covered = targets(mine);
            let extra: Vec<&String> = covered.difference(&link.group).collect();
            if !extra.is_empty() {
                w.push(format!("targets outside the link's group: {}", list(extra)));
            }
        }
        Tag::Duration => {
            for u in mine {
                if u.start != link.start {
                    w.push(format!(
                        "unit starts at {} but the span starts at {}",
                        u.start, link.start
                    ));
                }
                let expected = if u.action == Action::Emphasize {
                    link.span_duration.max(p.config.min_emphasis_ms)
                } else {
                    link.span_duration
                };
                if u.duration != expected {
                    w.push(format!(
                        "{} unit lasts {} ms, expected {expected}",
                        u.action, u.duration
                    ));
                }
            }
        }
        Tag::Synchronization => {
            if let Some(first) = mine.first() {
                for u in &mine[1..] {
                    if u.start != first.start || u.action != first.action {
                        w.push(format!(
                            "units at {} ({}) and {} ({}) are not synchronized",
                            first.start, first.action, u.start, u.action
                        ));
                    }
                }
            }
        }
        Tag::Semantic => {
            for u in mine {
                w.extend(check_semantic(u, p));
            }
        }
        other => w.push(format!("{other} is not a per-link constraint")),
    }
    w
}

fn check_semantic(u: &AnimationUnit, p: &ConstraintProblem) -> Vec<String> {
    let lib = &p.library;
    let mut w = Vec::new();
    let keys: BTreeSet<&String> = u.element_effects.keys().collect();
    if keys != u.element_ids.iter().collect::<BTreeSet<_>>() {
        w.push(format!("unit at {} lists effects for a different element set", u.start));
        return w;
    }
    let mut classes = Vec::new();
    for id in &u.element_ids {
        match p.element(id) {
            Some(e) => classes.push((id, e.role, e.shape)),
            None => {
                w.push(format!("unknown element `{id}`"));
                return w;
            }
        }
    }
    for (id, role, shape) in &classes {
        let name = &u.element_effects[*id];
        if !lib.effects_for(*shape, *role, u.action).contains(&name.as_str()) {
            w.push(format!(
                "`{name}` is not a {} effect for {role}/{shape} `{id}`",
                u.action
            ));
        }
    }
    if let Some(preset) = lib.preset(&u.effect) {
        let cls: Vec<(ElementRole, MarkShape)> = classes.iter().map(|(_, r, s)| (*r, *s)).collect();
        if !preset.matches(&cls) {
            w.push(format!(
                "preset `{}` does not match the targets' structure",
                preset.name
            ));
        }
        if lib.preset_action(preset) != u.action {
            w.push(format!("preset `{}` is not a {} preset", preset.name, u.action));
        }
        for (id, role, _) in &classes {
            if preset.effect_for(*role) != Some(u.element_effects[*id].as_str()) {
                w.push(format!("`{id}` does not play the preset's {role} effect"));
            }
        }
    } else {
        let distinct: BTreeSet<(ElementRole, MarkShape)> = classes.iter().map(|(_, r, s)| (*r, *s)).collect();
        if distinct.len() > 1 {
            w.push(format!("plain effect `{}` spans several element classes", u.effect));
        }
        if u.element_effects.values().any(|e| *e != u.effect) {
            w.push(format!("targets of `{}` play other effects", u.effect));
        }
    }
    w
}

fn check_consistency(
    role: ElementRole,
    shape: MarkShape,
    units: &[AnimationUnit],
    p: &ConstraintProblem,
) -> Vec<String> {
    let mut seen: BTreeMap<Action, (&str, &str)> = BTreeMap::new();
    let mut w = Vec::new();
    for u in units {
        for (id, effect) in &u.element_effects {
            let Some(e) = p.element(id) else { continue };
            if e.role != role || e.shape != shape {
                continue;
            }
            match seen.get(&u.action) {
                Some((first_id, first)) if *first != effect.as_str() => w.push(format!(
                    "`{first_id}` uses `{first}` but `{id}` uses `{effect}` for {}",
                    u.action
                )),
                Some(_) => {}
                None => {
                    seen.insert(u.action, (id, effect));
                }
            }
        }
    }
    w
}

fn touching<'a>(id: &str, units: &'a [AnimationUnit]) -> Vec<&'a AnimationUnit> {
    units.iter().filter(|u| u.element_ids.contains(id)).collect()
}

fn check_conflict(id: &str, units: &[AnimationUnit]) -> Vec<String> {
    let mine = touching(id, units);
    let mut w = Vec::new();
    for (action, must_be_first) in [(Action::Enter, true), (Action::Exit, false)] {
        let of_kind: Vec<&&AnimationUnit> = mine.iter().filter(|u| u.action == action).collect();
        if of_kind.len() > 1 {
            w.push(format!("{} {action} units", of_kind.len()));
        }
        for a in &of_kind {
            for b in &mine {
                if std::ptr::eq(**a, *b) {
                    continue;
                }
                let ok = if must_be_first {
                    a.start < b.start
                } else {
                    a.start > b.start
                };
                if !ok {
                    w.push(format!(
                        "{action} at {} is not strictly {} the {} at {}",
                        a.start,
                        if must_be_first { "before" } else { "after" },
                        b.action,
                        b.start
                    ));
                }
            }
        }
    }
    w
}

fn check_on_screen(id: &str, units: &[AnimationUnit]) -> Vec<String> {
    let vis = Visibility::from_units(units, id);
    let mut w = Vec::new();
    for u in touching(id, units) {
        match u.action {
            Action::Enter => {
                if vis.at(u.start) {
                    w.push(format!("enters at {} while already visible", u.start));
                }
            }
            Action::Exit => {
                if !vis.at(u.start) {
                    w.push(format!("exits at {} while not visible", u.start));
                }
            }
            Action::Emphasize => {
                let hidden_inside = vis.flips.iter().any(|f| !f.visible && f.t > u.start && f.t <= u.end());
                if !vis.at(u.start) || hidden_inside {
                    w.push(format!(
                        "emphasized during [{}, {}] while not visible",
                        u.start,
                        u.end()
                    ));
                }
            }
        }
    }
    w
}

fn appear(id: &str, units: &[AnimationUnit]) -> Millis {
    touching(id, units)
        .iter()
        .filter(|u| u.action == Action::Enter)
        .map(|u| u.start)
        .min()
        .unwrap_or(0)
}

fn check_order(before: RankClass, after: RankClass, units: &[AnimationUnit], p: &ConstraintProblem) -> Option<String> {
    let latest = p
        .elements
        .iter()
        .filter(|e| RankClass::of(e.role) == before)
        .map(|e| (appear(&e.id, units), &e.id))
        .max()?;
    let earliest = p
        .elements
        .iter()
        .filter(|e| RankClass::of(e.role) == after)
        .map(|e| (appear(&e.id, units), &e.id))
        .min()?;
    (latest.0 > earliest.0).then(|| {
        format!(
            "`{}` appears at {} after `{}` at {}",
            latest.1, latest.0, earliest.1, earliest.0
        )
    })
}

fn check_annotations_last(group: &str, units: &[AnimationUnit], p: &ConstraintProblem) -> Option<String> {
    let members = p.elements.iter().filter(|e| e.group_id.as_deref() == Some(group));
    let (annotations, others): (Vec<_>, Vec<_>) = members.partition(|e| e.role.is_annotation());
    let first_annotation = annotations.iter().map(|e| (appear(&e.id, units), &e.id)).min()?;
    let last_other = others.iter().map(|e| (appear(&e.id, units), &e.id)).max()?;
    (first_annotation.0 < last_other.0).then(|| {
        format!(
            "annotation `{}` appears at {} before `{}` at {}",
            first_annotation.1, first_annotation.0, last_other.1, last_other.0
        )
    })
}
