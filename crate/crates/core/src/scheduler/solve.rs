use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::Instant;

use crate::animation::Action;
use crate::chart::{ElementRole, MarkShape};
use crate::narration::Millis;

use super::{
    AnimationSequence, AnimationUnit, ConstraintProblem, Limits, LinkVars, RankClass, SolveError, SolveStats, Subject,
    Tag,
};

/// Tags the search itself has to enforce. The remaining tags hold by
/// construction of the units.
const SEARCHED: [Tag; 5] = [
    Tag::Consistency,
    Tag::Conflict,
    Tag::OnScreen,
    Tag::Order,
    Tag::Synchronization,
];

#[derive(Debug, Clone, PartialEq, Eq)]
enum Mode {
    Preset(String),
    Split,
}

#[derive(Debug, Clone)]
struct Choice {
    action: Action,
    mode: Mode,
    /// One effect per class of the link, in class order.
    effects: Vec<String>,
    duration: Millis,
}

type ClassKey = (ElementRole, MarkShape);

#[derive(Clone, Copy)]
struct Placed {
    action: Action,
    start: Millis,
    end: Millis,
}

struct Search<'a> {
    p: &'a ConstraintProblem,
    limits: Limits,
    began: Instant,
    /// Link positions in `p.links`, by (start, declaration index).
    order: Vec<usize>,
    /// Per link position: (element index, class index) for every group member.
    members: Vec<Vec<(usize, usize)>>,
    conflict_on: Vec<bool>,
    on_screen_on: Vec<bool>,
    consistent: BTreeSet<ClassKey>,
    order_pairs: BTreeSet<(RankClass, RankClass)>,
    annotation_groups: Vec<(Vec<usize>, Vec<usize>)>,
    rank: Vec<RankClass>,
    /// Elements whose last touching link is at this depth.
    finalize_at: Vec<Vec<usize>>,
    groups_at: Vec<Vec<usize>>,
    lower_bound: Vec<usize>,

    placed: Vec<Vec<Placed>>,
    finalized: Vec<bool>,
    consistency: BTreeMap<(ClassKey, Action), (String, usize)>,
    choices: Vec<Option<Choice>>,
    cost: usize,
    best: Option<(usize, Vec<Choice>)>,
    nodes: u64,
    exceeded: bool,
}

enum Outcome {
    Found(Vec<Choice>, u64),
    Exceeded(Option<Vec<Choice>>, u64),
    Unsat,
}

impl<'a> Search<'a> {
    fn new(p: &'a ConstraintProblem, limits: Limits, began: Instant) -> Self {
        let index: HashMap<&str, usize> = p.elements.iter().enumerate().map(|(i, e)| (e.id.as_str(), i)).collect();
        let n = p.elements.len();

        let mut order: Vec<usize> = (0..p.links.len()).collect();
        order.sort_by_key(|&i| (p.links[i].start, p.links[i].index));

        let members: Vec<Vec<(usize, usize)>> = order
            .iter()
            .map(|&li| {
                p.links[li]
                    .classes
                    .iter()
                    .enumerate()
                    .flat_map(|(ci, c)| c.members.iter().map(move |m| (m, ci)))
                    .map(|(m, ci)| (index[m.as_str()], ci))
                    .collect()
            })
            .collect();

        let mut conflict_on = vec![false; n];
        let mut on_screen_on = vec![false; n];
        let mut consistent = BTreeSet::new();
        let mut order_pairs = BTreeSet::new();
        let mut annotation_groups = Vec::new();
        for c in &p.constraints {
            match (&c.tag, &c.subject) {
                (Tag::Conflict, Subject::Element { id }) => conflict_on[index[id.as_str()]] = true,
                (Tag::OnScreen, Subject::Element { id }) => on_screen_on[index[id.as_str()]] = true,
                (Tag::Consistency, Subject::Class { role, shape }) => {
                    consistent.insert((*role, *shape));
                }
                (Tag::Order, Subject::RankPair { before, after }) => {
                    order_pairs.insert((*before, *after));
                }
                (Tag::Synchronization, Subject::Group { id }) => {
                    let (a, o): (Vec<usize>, Vec<usize>) = p
                        .elements
                        .iter()
                        .enumerate()
                        .filter(|(_, e)| e.group_id.as_deref() == Some(id.as_str()))
                        .map(|(i, _)| i)
                        .partition(|&i| p.elements[i].role.is_annotation());
                    annotation_groups.push((a, o));
                }
                _ => {}
            }
        }

        let mut last_touch: Vec<Option<usize>> = vec![None; n];
        for (depth, m) in members.iter().enumerate() {
            for &(e, _) in m {
                last_touch[e] = Some(depth);
            }
        }
        let depth_count = order.len();
        let mut finalize_at = vec![Vec::new(); depth_count];
        let mut finalized = vec![true; n];
        for (e, d) in last_touch.iter().enumerate() {
            if let Some(d) = d {
                finalize_at[*d].push(e);
                finalized[e] = false;
            }
        }
        let mut groups_at = vec![Vec::new(); depth_count];
        for (g, (a, o)) in annotation_groups.iter().enumerate() {
            if let Some(d) = a.iter().chain(o).filter_map(|&e| last_touch[e]).max() {
                groups_at[d].push(g);
            }
        }

        let mut lower_bound = vec![0; depth_count + 1];
        for depth in (0..depth_count).rev() {
            let l = &p.links[order[depth]];
            let cheapest = if l.options.iter().any(|o| !o.presets.is_empty()) {
                1
            } else {
                l.classes.len()
            };
            lower_bound[depth] = lower_bound[depth + 1] + cheapest;
        }

        Self {
            p,
            limits,
            began,
            members,
            conflict_on,
            on_screen_on,
            consistent,
            order_pairs,
            annotation_groups,
            rank: p.elements.iter().map(|e| RankClass::of(e.role)).collect(),
            finalize_at,
            groups_at,
            lower_bound,
            placed: vec![Vec::new(); n],
            finalized,
            consistency: BTreeMap::new(),
            choices: vec![None; depth_count],
            cost: 0,
            best: None,
            nodes: 0,
            exceeded: false,
            order,
        }
    }

    fn link(&self, depth: usize) -> &'a LinkVars {
        &self.p.links[self.order[depth]]
    }

    fn run(mut self) -> Outcome {
        self.dfs(0);
        match (self.exceeded, self.best) {
            (false, Some((_, c))) => Outcome::Found(c, self.nodes),
            (false, None) => Outcome::Unsat,
            (true, best) => Outcome::Exceeded(best.map(|b| b.1), self.nodes),
        }
    }

    fn dfs(&mut self, depth: usize) {
        if self.exceeded {
            return;
        }
        if depth == self.order.len() {
            if self.best.as_ref().is_none_or(|(c, _)| self.cost < *c) {
                let choices = self.choices.iter().map(|c| c.clone().expect("assigned")).collect();
                self.best = Some((self.cost, choices));
            }
            return;
        }
        let link = self.link(depth);
        for opt in &link.options {
            if !self.conflict_allows(depth, opt.action) {
                continue;
            }
            for preset_name in &opt.presets {
                let preset = self.p.library.preset(preset_name).expect("encoded preset exists");
                let effects: Vec<String> = link
                    .classes
                    .iter()
                    .map(|c| preset.effect_for(c.role).expect("preset covers class").to_string())
                    .collect();
                self.try_choice(
                    depth,
                    Choice {
                        action: opt.action,
                        mode: Mode::Preset(preset_name.clone()),
                        effects,
                        duration: opt.duration,
                    },
                );
                if self.exceeded {
                    return;
                }
            }
            if opt.split {
                let domains: Vec<Vec<String>> = link
                    .classes
                    .iter()
                    .map(|c| {
                        let all = &c.effects[&opt.action];
                        match self.consistency.get(&((c.role, c.shape), opt.action)) {
                            Some((pinned, _)) if self.consistent.contains(&(c.role, c.shape)) => {
                                all.iter().filter(|e| *e == pinned).cloned().collect()
                            }
                            _ => all.clone(),
                        }
                    })
                    .collect();
                let mut picked = Vec::with_capacity(domains.len());
                self.split_product(depth, opt.action, opt.duration, &domains, &mut picked);
                if self.exceeded {
                    return;
                }
            }
        }
    }

    fn split_product(
        &mut self,
        depth: usize,
        action: Action,
        duration: Millis,
        domains: &[Vec<String>],
        picked: &mut Vec<String>,
    ) {
        if picked.len() == domains.len() {
            self.try_choice(
                depth,
                Choice {
                    action,
                    mode: Mode::Split,
                    effects: picked.clone(),
                    duration,
                },
            );
            return;
        }
        for e in &domains[picked.len()] {
            picked.push(e.clone());
            self.split_product(depth, action, duration, domains, picked);
            picked.pop();
            if self.exceeded {
                return;
            }
        }
    }

    fn conflict_allows(&self, depth: usize, action: Action) -> bool {
        let start = self.link(depth).start;
        self.members[depth].iter().all(|&(e, _)| {
            if !self.conflict_on[e] {
                return true;
            }
            let prior = &self.placed[e];
            if prior.iter().any(|u| u.action == Action::Exit) {
                return false;
            }
            match action {
                Action::Enter => prior.is_empty(),
                Action::Emphasize => !prior.iter().any(|u| u.action == Action::Enter && u.start == start),
                Action::Exit => !prior.iter().any(|u| u.start == start),
            }
        })
    }

    fn cost_of(&self, depth: usize, choice: &Choice) -> usize {
        match choice.mode {
            Mode::Preset(_) => 1,
            Mode::Split => self.link(depth).classes.len(),
        }
    }

    fn try_choice(&mut self, depth: usize, choice: Choice) {
        let added = self.cost_of(depth, &choice);
        if let Some((best, _)) = &self.best {
            if self.cost + added + self.lower_bound[depth + 1] >= *best {
                return;
            }
        }
        self.nodes += 1;
        if self.nodes > self.limits.max_nodes
            || (self.nodes.is_multiple_of(256) && self.began.elapsed() > self.limits.max_time)
        {
            self.exceeded = true;
            return;
        }
        let link = self.link(depth);
        for (c, effect) in link.classes.iter().zip(&choice.effects) {
            let key = (c.role, c.shape);
            if self.consistent.contains(&key) {
                if let Some((pinned, _)) = self.consistency.get(&(key, choice.action)) {
                    if pinned != effect {
                        return;
                    }
                }
            }
        }

        let unit = Placed {
            action: choice.action,
            start: link.start,
            end: link.start + choice.duration,
        };
        for &(e, _) in &self.members[depth] {
            self.placed[e].push(unit);
        }
        for (c, effect) in link.classes.iter().zip(&choice.effects) {
            self.consistency
                .entry(((c.role, c.shape), choice.action))
                .and_modify(|v| v.1 += 1)
                .or_insert((effect.clone(), 1));
        }
        for &e in &self.finalize_at[depth] {
            self.finalized[e] = true;
        }
        self.cost += added;
        self.choices[depth] = Some(choice.clone());

        if self.finalized_ok(depth) {
            self.dfs(depth + 1);
        }

        self.choices[depth] = None;
        self.cost -= added;
        for &e in &self.finalize_at[depth] {
            self.finalized[e] = false;
        }
        for c in &link.classes {
            let key = ((c.role, c.shape), choice.action);
            let v = self.consistency.get_mut(&key).expect("inserted above");
            v.1 -= 1;
            if v.1 == 0 {
                self.consistency.remove(&key);
            }
        }
        for &(e, _) in &self.members[depth] {
            self.placed[e].pop();
        }
    }

    fn appear(&self, e: usize) -> Millis {
        self.placed[e]
            .iter()
            .filter(|u| u.action == Action::Enter)
            .map(|u| u.start)
            .min()
            .unwrap_or(0)
    }

    /// Element-level constraints for everything that became final at `depth`.
    fn finalized_ok(&self, depth: usize) -> bool {
        for &e in &self.finalize_at[depth] {
            if self.on_screen_on[e] && !visible_where_needed(&self.placed[e]) {
                return false;
            }
            if !self.order_pairs.is_empty() {
                let a = self.appear(e);
                for f in 0..self.placed.len() {
                    if f == e || !self.finalized[f] {
                        continue;
                    }
                    let b = self.appear(f);
                    if self.order_pairs.contains(&(self.rank[e], self.rank[f])) && a > b {
                        return false;
                    }
                    if self.order_pairs.contains(&(self.rank[f], self.rank[e])) && b > a {
                        return false;
                    }
                }
            }
        }
        for &g in &self.groups_at[depth] {
            let (annotations, others) = &self.annotation_groups[g];
            let first = annotations.iter().map(|&e| self.appear(e)).min();
            let last = others.iter().map(|&e| self.appear(e)).max();
            if let (Some(first), Some(last)) = (first, last) {
                if first < last {
                    return false;
                }
            }
        }
        true
    }
}

/// Visibility rules for one element's units, independent of the checker.
fn visible_where_needed(units: &[Placed]) -> bool {
    let hidden_at_zero = units.iter().any(|u| u.action == Action::Enter);
    let mut events: Vec<(Millis, bool)> = units
        .iter()
        .filter(|u| u.action != Action::Emphasize)
        .map(|u| (u.end, u.action == Action::Enter))
        .collect();
    events.sort_by_key(|ev| ev.0);
    let shown = |t: Millis| {
        let mut v = !hidden_at_zero;
        for &(at, to) in &events {
            if at > t {
                break;
            }
            v = to;
        }
        v
    };
    units.iter().all(|u| match u.action {
        Action::Enter => !shown(u.start),
        Action::Exit => shown(u.start),
        Action::Emphasize => shown(u.start) && !events.iter().any(|&(at, to)| !to && at > u.start && at <= u.end),
    })
}

fn build(p: &ConstraintProblem, order: &[usize], choices: &[Choice], stats: SolveStats) -> AnimationSequence {
    let mut units = Vec::new();
    for (depth, choice) in choices.iter().enumerate() {
        let link = &p.links[order[depth]];
        let unit = |ids: Vec<(&String, &String)>, effect: String| AnimationUnit {
            element_ids: ids.iter().map(|(id, _)| (*id).clone()).collect(),
            start: link.start,
            duration: choice.duration,
            action: choice.action,
            effect,
            element_effects: ids.iter().map(|(id, e)| ((*id).clone(), (*e).clone())).collect(),
            link_index: Some(link.index),
        };
        match &choice.mode {
            Mode::Preset(name) => {
                let ids = link
                    .classes
                    .iter()
                    .zip(&choice.effects)
                    .flat_map(|(c, e)| c.members.iter().map(move |m| (m, e)))
                    .collect();
                units.push(unit(ids, name.clone()));
            }
            Mode::Split => {
                for (c, e) in link.classes.iter().zip(&choice.effects) {
                    units.push(unit(c.members.iter().map(|m| (m, e)).collect(), e.clone()));
                }
            }
        }
    }
    AnimationSequence::new(units, stats)
}

fn search_order(p: &ConstraintProblem) -> Vec<usize> {
    let mut order: Vec<usize> = (0..p.links.len()).collect();
    order.sort_by_key(|&i| (p.links[i].start, p.links[i].index));
    order
}

/// Minimizes the number of animation units. Returns the first optimum in
/// search order: links by start time, actions enter → emphasize → exit,
/// presets by priority before per-class units, effects in library order.
pub fn solve(p: &ConstraintProblem, limits: &Limits) -> Result<AnimationSequence, SolveError> {
    let began = Instant::now();
    let order = search_order(p);
    let stats = |nodes, optimal| SolveStats {
        nodes,
        wall_ms: began.elapsed().as_millis() as u64,
        optimal,
    };
    match Search::new(p, *limits, began).run() {
        Outcome::Found(choices, nodes) => Ok(build(p, &order, &choices, stats(nodes, true))),
        Outcome::Exceeded(best, nodes) => Err(SolveError::BudgetExceeded {
            best: best.map(|c| Box::new(build(p, &order, &c, stats(nodes, false)))),
            nodes,
        }),
        Outcome::Unsat => Err(SolveError::Unsatisfiable {
            tags: minimal_failing_tags(p, limits),
        }),
    }
}

/// Solves with only the constraint instances whose tag is listed.
pub fn solve_with_tags(p: &ConstraintProblem, limits: &Limits, tags: &[Tag]) -> Result<AnimationSequence, SolveError> {
    let dropped: Vec<Tag> = Tag::ALL.into_iter().filter(|t| !tags.contains(t)).collect();
    solve(&p.without_tags(&dropped), limits)
}

/// Deletion filter over the searched tags: drop each tag whose removal
/// keeps the problem unsatisfiable.
fn minimal_failing_tags(p: &ConstraintProblem, limits: &Limits) -> Vec<Tag> {
    let mut keep: Vec<Tag> = SEARCHED.into_iter().filter(|t| p.count(*t) > 0).collect();
    for t in keep.clone() {
        let trial: Vec<Tag> = keep.iter().copied().filter(|k| *k != t).collect();
        let dropped: Vec<Tag> = SEARCHED.into_iter().filter(|s| !trial.contains(s)).collect();
        let q = p.without_tags(&dropped);
        if matches!(Search::new(&q, *limits, Instant::now()).run(), Outcome::Unsat) {
            keep = trial;
        }
    }
    keep
}
