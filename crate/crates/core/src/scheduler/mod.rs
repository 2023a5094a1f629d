//! Animation scheduling as a finite-domain constraint problem.
//!
//! [`encode`] turns a chart, its resolved links and the audio clock into a
//! [`ConstraintProblem`]; [`solve`] searches it depth-first with forward
//! checking and branch-and-bound on the number of animation units; [`check`]
//! re-evaluates every constraint instance against a finished sequence and
//! shares no code with the search.
//!
//! Per link the decision variables are the action, the mode (a matching
//! preset, or `split`: one unit per (role, shape) class of the link's group)
//! and, in split mode, one effect per class. Targets, start and duration are
//! fixed by the group, association and duration constraints.

mod check;
mod encode;
mod onscreen;
mod solve;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::animation::{Action, Library};
use crate::chart::{ElementRole, MarkShape};
use crate::narration::{Millis, NarrationError, SegmentSpan};

pub use check::check;
pub use encode::encode;
pub use onscreen::{on_screen_table, Flip, OnScreenTable, Visibility};
pub use solve::{solve, solve_with_tags};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchedulerConfig {
    /// Emphasis units last at least this long; the start never moves.
    pub min_emphasis_ms: Millis,
    pub role_order: bool,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            min_emphasis_ms: 500,
            role_order: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_nodes: u64,
    pub max_time: Duration,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_nodes: 1_000_000,
            max_time: Duration::from_secs(10),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EncodeError {
    #[error("link {link} has no applicable effect for element `{element}`")]
    InfeasibleDomain { link: usize, element: String },
    #[error("link {link} refers to unknown element `{element}`")]
    UnknownElement { link: usize, element: String },
    #[error(transparent)]
    Timing(#[from] NarrationError),
}

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error("no schedule satisfies the constraints; minimal failing tags: {}", fmt_tags(tags))]
    Unsatisfiable { tags: Vec<Tag> },
    #[error("search budget exhausted after {nodes} nodes{}", if best.is_some() { " (best schedule so far kept)" } else { "" })]
    BudgetExceeded {
        best: Option<Box<AnimationSequence>>,
        nodes: u64,
    },
}

fn fmt_tags(tags: &[Tag]) -> String {
    tags.iter().map(|t| t.as_str()).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tag {
    Linking,
    Integrity,
    Group,
    Association,
    Consistency,
    Duration,
    Conflict,
    OnScreen,
    Order,
    Synchronization,
    Semantic,
}

impl Tag {
    pub const ALL: [Tag; 11] = [
        Tag::Linking,
        Tag::Integrity,
        Tag::Group,
        Tag::Association,
        Tag::Consistency,
        Tag::Duration,
        Tag::Conflict,
        Tag::OnScreen,
        Tag::Order,
        Tag::Synchronization,
        Tag::Semantic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Tag::Linking => "linking",
            Tag::Integrity => "integrity",
            Tag::Group => "group",
            Tag::Association => "association",
            Tag::Consistency => "consistency",
            Tag::Duration => "duration",
            Tag::Conflict => "conflict",
            Tag::OnScreen => "on_screen",
            Tag::Order => "order",
            Tag::Synchronization => "synchronization",
            Tag::Semantic => "semantic",
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Appearance tiers for the order constraint. Axis labels and symbols are
/// their own class so they may appear after data items.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankClass {
    Background,
    Title,
    Axis,
    AxisDetail,
    Data,
}

impl RankClass {
    pub const ALL: [RankClass; 5] = [
        RankClass::Background,
        RankClass::Title,
        RankClass::Axis,
        RankClass::AxisDetail,
        RankClass::Data,
    ];

    pub fn of(role: ElementRole) -> RankClass {
        match role {
            ElementRole::Background => RankClass::Background,
            ElementRole::Title => RankClass::Title,
            ElementRole::Axis => RankClass::Axis,
            ElementRole::AxisLabel | ElementRole::AxisSymbol => RankClass::AxisDetail,
            _ => RankClass::Data,
        }
    }

    fn tier(self) -> u8 {
        match self {
            RankClass::Background => 0,
            RankClass::Title => 1,
            RankClass::Axis | RankClass::AxisDetail => 2,
            RankClass::Data => 3,
        }
    }

    /// Whether elements of `self` must appear no later than those of `other`.
    pub fn precedes(self, other: RankClass) -> bool {
        self.tier() < other.tier() && !(self == RankClass::AxisDetail && other == RankClass::Data)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Subject {
    Global,
    Link { index: usize },
    Element { id: String },
    Class { role: ElementRole, shape: MarkShape },
    RankPair { before: RankClass, after: RankClass },
    Group { id: String },
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::Global => f.write_str("all units"),
            Subject::Link { index } => write!(f, "link {index}"),
            Subject::Element { id } => write!(f, "element `{id}`"),
            Subject::Class { role, shape } => write!(f, "class {role}/{shape}"),
            Subject::RankPair { before, after } => write!(f, "{before:?} before {after:?}"),
            Subject::Group { id } => write!(f, "group `{id}`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConstraintInstance {
    pub tag: Tag,
    pub subject: Subject,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ElementInfo {
    pub id: String,
    pub role: ElementRole,
    pub shape: MarkShape,
    pub group_id: Option<String>,
}

/// Elements of one (role, shape) class inside a link's group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassVars {
    pub role: ElementRole,
    pub shape: MarkShape,
    pub members: Vec<String>,
    /// Effect domain per action, in library preference order.
    pub effects: BTreeMap<Action, Vec<String>>,
}

/// One value of a link's action variable with the modes it allows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ActionOption {
    pub action: Action,
    /// Matching presets of this action, by priority.
    pub presets: Vec<String>,
    /// Whether every class has an effect for this action.
    pub split: bool,
    pub duration: Millis,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LinkVars {
    pub index: usize,
    pub span: SegmentSpan,
    pub element_ids: BTreeSet<String>,
    /// `element_ids` plus every element sharing a data group with them.
    pub group: BTreeSet<String>,
    pub start: Millis,
    pub span_duration: Millis,
    pub classes: Vec<ClassVars>,
    pub options: Vec<ActionOption>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintProblem {
    pub elements: Vec<ElementInfo>,
    pub links: Vec<LinkVars>,
    pub constraints: Vec<ConstraintInstance>,
    pub library: Library,
    pub config: SchedulerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Variable {
    pub name: String,
    pub domain: Vec<String>,
}

impl ConstraintProblem {
    pub fn element(&self, id: &str) -> Option<&ElementInfo> {
        self.elements.iter().find(|e| e.id == id)
    }

    pub fn count(&self, tag: Tag) -> usize {
        self.constraints.iter().filter(|c| c.tag == tag).count()
    }

    pub fn without_tags(&self, tags: &[Tag]) -> ConstraintProblem {
        let mut p = self.clone();
        p.constraints.retain(|c| !tags.contains(&c.tag));
        p
    }

    pub fn variables(&self) -> Vec<Variable> {
        let mut vars = Vec::new();
        for l in &self.links {
            let name = |v: &str| format!("link{}.{v}", l.index);
            vars.push(Variable {
                name: name("action"),
                domain: l.options.iter().map(|o| o.action.to_string()).collect(),
            });
            let mut modes: Vec<String> = Vec::new();
            for o in &l.options {
                for p in &o.presets {
                    if !modes.contains(p) {
                        modes.push(p.clone());
                    }
                }
            }
            if l.options.iter().any(|o| o.split) {
                modes.push("split".into());
            }
            vars.push(Variable {
                name: name("mode"),
                domain: modes,
            });
            for c in &l.classes {
                let mut domain: Vec<String> = Vec::new();
                for o in &l.options {
                    for e in c.effects.get(&o.action).into_iter().flatten() {
                        if !domain.contains(e) {
                            domain.push(e.clone());
                        }
                    }
                }
                vars.push(Variable {
                    name: name(&format!("effect[{}/{}]", c.role, c.shape)),
                    domain,
                });
            }
            vars.push(Variable {
                name: name("start"),
                domain: vec![l.start.to_string()],
            });
            let mut durations: Vec<String> = l.options.iter().map(|o| o.duration.to_string()).collect();
            durations.dedup();
            durations.sort();
            durations.dedup();
            vars.push(Variable {
                name: name("duration"),
                domain: durations,
            });
        }
        for e in &self.elements {
            vars.push(Variable {
                name: format!("{}.on_screen", e.id),
                domain: vec!["false".into(), "true".into()],
            });
        }
        vars
    }

    /// Structured dump for inspection.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "objective": "minimize animation unit count",
            "config": {
                "min_emphasis_ms": self.config.min_emphasis_ms,
                "role_order": self.config.role_order,
            },
            "elements": self.elements,
            "links": self.links,
            "variables": self.variables(),
            "constraints": self.constraints,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnimationUnit {
    pub element_ids: BTreeSet<String>,
    pub start: Millis,
    pub duration: Millis,
    pub action: Action,
    /// An effect name, or a preset name for preset units.
    pub effect: String,
    /// The concrete effect each target plays.
    pub element_effects: BTreeMap<String, String>,
    pub link_index: Option<usize>,
}

impl AnimationUnit {
    pub fn end(&self) -> Millis {
        self.start + self.duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct SolveStats {
    pub nodes: u64,
    #[serde(skip)]
    pub wall_ms: u64,
    pub optimal: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnimationSequence {
    /// Ordered by start, then link index, then first target id.
    pub units: Vec<AnimationUnit>,
    pub objective_value: usize,
    pub stats: SolveStats,
}

impl AnimationSequence {
    pub fn new(mut units: Vec<AnimationUnit>, stats: SolveStats) -> Self {
        sort_units(&mut units);
        Self {
            objective_value: units.len(),
            units,
            stats,
        }
    }

    /// Most units playing at one instant. Overlap on different elements is
    /// allowed; this only reports how dense the schedule gets.
    pub fn peak_concurrency(&self) -> usize {
        let mut edges: Vec<(Millis, i32)> = self
            .units
            .iter()
            .filter(|u| u.duration > 0)
            .flat_map(|u| [(u.start, 1), (u.end(), -1)])
            .collect();
        // Ends sort before starts at the same instant.
        edges.sort();
        let mut live = 0i32;
        let mut peak = 0;
        for (_, d) in edges {
            live += d;
            peak = peak.max(live as usize);
        }
        peak
    }
}

pub fn sort_units(units: &mut [AnimationUnit]) {
    units.sort_by(|a, b| {
        a.start
            .cmp(&b.start)
            .then(a.link_index.cmp(&b.link_index))
            .then_with(|| a.element_ids.iter().next().cmp(&b.element_ids.iter().next()))
    });
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub tag: Tag,
    pub subject: String,
    pub witness: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.tag, self.subject, self.witness)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_precedence() {
        use RankClass::*;
        assert!(Background.precedes(Title));
        assert!(Title.precedes(Axis));
        assert!(Axis.precedes(Data));
        assert!(!AxisDetail.precedes(Data));
        assert!(Title.precedes(AxisDetail));
        assert!(!Axis.precedes(AxisDetail));
        assert!(!Data.precedes(Background));
    }
}
