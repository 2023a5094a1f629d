//! Animation library: actions, effects with applicability rules, and
//! prioritized multi-role presets.
//!
//! The library is data. The built-in copy is `assets/animations.json`;
//! a user file with the same layout replaces it. File order of effects is
//! preference order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chart::{ElementRole, MarkShape, VisualElement};

const DEFAULT_LIBRARY: &str = include_str!("../../assets/animations.json");

pub const DEFAULT_HIGHLIGHT: &str = "#d62728";

#[derive(Debug, thiserror::Error)]
pub enum LibraryError {
    #[error("cannot read library {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("library is not valid: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("library is inconsistent: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Action {
    Enter,
    Exit,
    Emphasize,
}

impl Action {
    /// Order in which the scheduler tries actions for a link.
    pub const SEARCH_ORDER: [Action; 3] = [Action::Enter, Action::Emphasize, Action::Exit];

    pub fn as_str(self) -> &'static str {
        match self {
            Action::Enter => "enter",
            Action::Exit => "exit",
            Action::Emphasize => "emphasize",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How the exporter draws an effect's progress.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Render {
    /// Opacity follows progress.
    Fade,
    /// Vertical scale from the bottom edge.
    Grow,
    /// Horizontal reveal from the left edge.
    Wipe,
    /// Scale from the center.
    Wheel,
    /// Slide in from the left by `distance` px.
    Fly,
    /// Scale down to the center.
    Zoom,
    /// Opacity dips by `dip` at mid-progress and recovers.
    Shine,
    /// Fill switches to the highlight color and stays.
    Recolor,
    /// Lifts by `height` px at mid-progress and settles.
    Bounce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub default: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Effect {
    pub name: String,
    pub action: Action,
    pub render: Render,
    pub applicable_shapes: BTreeSet<MarkShape>,
    pub applicable_roles: BTreeSet<ElementRole>,
    #[serde(default)]
    pub params: Vec<Param>,
}

impl Effect {
    pub fn applies_to(&self, shape: MarkShape, role: ElementRole) -> bool {
        self.applicable_shapes.contains(&shape) && self.applicable_roles.contains(&role)
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|p| p.name == name).map(|p| p.default)
    }
}

/// One slot of a preset pattern: one or more elements of `role` whose shape
/// is in `shapes`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureSlot {
    pub role: ElementRole,
    pub shapes: BTreeSet<MarkShape>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub required_structure: Vec<StructureSlot>,
    pub per_role_effects: BTreeMap<ElementRole, String>,
    pub priority: i64,
}

impl Preset {
    /// True when every class fits a slot and every slot is used.
    pub fn matches(&self, classes: &[(ElementRole, MarkShape)]) -> bool {
        if classes.is_empty() {
            return false;
        }
        let fits = |slot: &StructureSlot, (role, shape): &(ElementRole, MarkShape)| {
            slot.role == *role && slot.shapes.contains(shape)
        };
        classes
            .iter()
            .all(|c| self.required_structure.iter().any(|s| fits(s, c)))
            && self
                .required_structure
                .iter()
                .all(|s| classes.iter().any(|c| fits(s, c)))
    }

    pub fn effect_for(&self, role: ElementRole) -> Option<&str> {
        self.per_role_effects.get(&role).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Library {
    #[serde(default = "default_highlight")]
    pub highlight_color: String,
    pub effects: Vec<Effect>,
    #[serde(default)]
    pub presets: Vec<Preset>,
}

fn default_highlight() -> String {
    DEFAULT_HIGHLIGHT.to_string()
}

pub fn default_library() -> Library {
    Library::from_json(DEFAULT_LIBRARY).expect("built-in library is valid")
}

impl Library {
    pub fn from_json(s: &str) -> Result<Library, LibraryError> {
        let lib: Library = serde_json::from_str(s)?;
        lib.validate()?;
        Ok(lib)
    }

    pub fn load(path: &Path) -> Result<Library, LibraryError> {
        let s = std::fs::read_to_string(path).map_err(|source| LibraryError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Library::from_json(&s)
    }

    pub fn validate(&self) -> Result<(), LibraryError> {
        let bad = |m: String| Err(LibraryError::Invalid(m));
        let mut names = BTreeSet::new();
        for e in &self.effects {
            if !names.insert(e.name.as_str()) {
                return bad(format!("effect `{}` is defined twice", e.name));
            }
            if e.applicable_shapes.is_empty() || e.applicable_roles.is_empty() {
                return bad(format!("effect `{}` applies to nothing", e.name));
            }
        }
        let mut preset_names = BTreeSet::new();
        for p in &self.presets {
            if !preset_names.insert(p.name.as_str()) {
                return bad(format!("preset `{}` is defined twice", p.name));
            }
            let roles: BTreeSet<ElementRole> = p.required_structure.iter().map(|s| s.role).collect();
            if roles.len() < 2 {
                return bad(format!("preset `{}` covers fewer than two roles", p.name));
            }
            if roles.len() != p.required_structure.len() {
                return bad(format!("preset `{}` lists a role twice", p.name));
            }
            if p.per_role_effects.keys().copied().collect::<BTreeSet<_>>() != roles {
                return bad(format!(
                    "preset `{}` must name one effect per role in its structure",
                    p.name
                ));
            }
            let mut action = None;
            for slot in &p.required_structure {
                if slot.shapes.is_empty() {
                    return bad(format!("preset `{}` has an empty shape set for {}", p.name, slot.role));
                }
                let name = &p.per_role_effects[&slot.role];
                let Some(effect) = self.effect(name) else {
                    return bad(format!("preset `{}` refers to unknown effect `{name}`", p.name));
                };
                if let Some(shape) = slot.shapes.iter().find(|s| !effect.applies_to(**s, slot.role)) {
                    return bad(format!(
                        "preset `{}`: effect `{name}` does not apply to {} {shape}",
                        p.name, slot.role
                    ));
                }
                if action.is_some_and(|a| a != effect.action) {
                    return bad(format!("preset `{}` mixes actions", p.name));
                }
                action = Some(effect.action);
            }
        }
        Ok(())
    }

    pub fn effect(&self, name: &str) -> Option<&Effect> {
        self.effects.iter().find(|e| e.name == name)
    }

    /// Effects for the query, in preference order.
    pub fn effects_for(&self, shape: MarkShape, role: ElementRole, action: Action) -> Vec<&str> {
        self.effects
            .iter()
            .filter(|e| e.action == action && e.applies_to(shape, role))
            .map(|e| e.name.as_str())
            .collect()
    }

    /// The single action shared by a preset's effects.
    pub fn preset_action(&self, preset: &Preset) -> Action {
        let name = preset.per_role_effects.values().next().expect("validated preset");
        self.effect(name).expect("validated preset").action
    }

    pub fn preset(&self, name: &str) -> Option<&Preset> {
        self.presets.iter().find(|p| p.name == name)
    }

    /// Presets whose structure is an exact cover of the group, by priority
    /// then name.
    pub fn matching_presets(&self, group: &[&VisualElement]) -> Vec<&Preset> {
        let classes: Vec<(ElementRole, MarkShape)> = group.iter().map(|e| (e.role, e.shape)).collect();
        self.matching_presets_for(&classes)
    }

    pub fn matching_presets_for(&self, classes: &[(ElementRole, MarkShape)]) -> Vec<&Preset> {
        let mut found: Vec<&Preset> = self.presets.iter().filter(|p| p.matches(classes)).collect();
        found.sort_by(|a, b| a.priority.cmp(&b.priority).then_with(|| a.name.cmp(&b.name)));
        found
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use ElementRole as R;
    use MarkShape as S;

    #[test]
    fn built_in_minimum() {
        let lib = default_library();
        let enter_rect = lib.effects_for(S::Rect, R::Mark, Action::Enter);
        assert!(enter_rect.contains(&"fade-in") && enter_rect.contains(&"grow"));
        assert!(lib.effects_for(S::Arc, R::Mark, Action::Enter).contains(&"wheel"));
        assert!(!lib.effects_for(S::Arc, R::Mark, Action::Emphasize).contains(&"grow"));
        assert!(lib.effects_for(S::LinePath, R::Mark, Action::Enter).contains(&"wipe"));
        assert!(lib
            .effects_for(S::Rule, R::AnnotationShape, Action::Enter)
            .contains(&"wipe"));
        assert!(lib
            .effects_for(S::Text, R::LegendLabel, Action::Enter)
            .contains(&"fly-in"));
        assert!(lib
            .effects_for(S::Rect, R::LegendSymbol, Action::Enter)
            .contains(&"fly-in"));
        for shape in MarkShape::ALL {
            for role in ElementRole::ALL {
                let exit = lib.effects_for(shape, role, Action::Exit);
                assert_eq!(exit, ["fade-out", "zoom-out"]);
                assert!(lib.effects_for(shape, role, Action::Emphasize).contains(&"shine"));
                assert_eq!(lib.effects_for(shape, role, Action::Enter)[0], "fade-in");
            }
        }
        assert!(lib
            .effects_for(S::Point, R::Mark, Action::Emphasize)
            .contains(&"bounce"));
        assert!(lib
            .effects_for(S::Rect, R::Mark, Action::Emphasize)
            .contains(&"change-color"));
        assert!(!lib
            .effects_for(S::Text, R::AxisLabel, Action::Emphasize)
            .contains(&"change-color"));
        assert_eq!(lib.highlight_color, DEFAULT_HIGHLIGHT);
    }

    #[test]
    fn pie_group_matches_preset() {
        let lib = default_library();
        let found =
            lib.matching_presets_for(&[(R::Mark, S::Arc), (R::LegendSymbol, S::Rect), (R::LegendLabel, S::Text)]);
        let names: Vec<_> = found.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["pie-wheel-and-legend-fly-in"]);
        assert_eq!(lib.preset_action(found[0]), Action::Enter);
    }

    #[test]
    fn single_role_matches_nothing() {
        let lib = default_library();
        assert!(lib.matching_presets_for(&[(R::Mark, S::Rect)]).is_empty());
        assert!(lib
            .matching_presets_for(&[(R::Mark, S::Rect), (R::Mark, S::Rect)])
            .is_empty());
        assert!(lib.matching_presets_for(&[]).is_empty());
    }

    #[test]
    fn extra_class_breaks_the_cover() {
        let lib = default_library();
        assert_eq!(
            lib.matching_presets_for(&[(R::Mark, S::Rect), (R::AxisLabel, S::Text)])
                .len(),
            1
        );
        assert!(lib
            .matching_presets_for(&[(R::Mark, S::Rect), (R::AxisLabel, S::Text), (R::Title, S::Text)])
            .is_empty());
    }

    #[test]
    fn presets_sorted_by_priority_then_name() {
        let mut lib = default_library();
        let mut twin = lib.presets[1].clone();
        twin.name = "a-bar-twin".into();
        lib.presets.push(twin.clone());
        twin.name = "z-bar-first".into();
        twin.priority = -1;
        lib.presets.push(twin);
        let found = lib.matching_presets_for(&[(R::Mark, S::Rect), (R::AxisLabel, S::Text)]);
        let names: Vec<_> = found.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["z-bar-first", "a-bar-twin", "bar-grow-with-label"]);
    }

    fn edit(f: impl FnOnce(&mut serde_json::Value)) -> Result<Library, LibraryError> {
        let mut v: serde_json::Value = serde_json::from_str(DEFAULT_LIBRARY).unwrap();
        f(&mut v);
        Library::from_json(&v.to_string())
    }

    #[test]
    fn validation_rejects_bad_libraries() {
        assert!(edit(|v| v["presets"][0]["per_role_effects"]["mark"] = "spin".into()).is_err());
        assert!(edit(|v| v["presets"][1]["per_role_effects"]["axis-label"] = "grow".into()).is_err());
        assert!(edit(|v| v["presets"][1]["per_role_effects"]["axis-label"] = "fade-out".into()).is_err());
        assert!(edit(|v| {
            let s = v["presets"][1]["required_structure"][0].clone();
            v["presets"][1]["required_structure"] = serde_json::json!([s]);
            v["presets"][1]["per_role_effects"] = serde_json::json!({"mark": "grow"});
        })
        .is_err());
        assert!(edit(|v| v["effects"][1]["name"] = "fade-in".into()).is_err());
        assert!(edit(|v| v["effects"][1]["applicable_roles"] = serde_json::json!([])).is_err());
        assert!(edit(|v| v["effects"][0]["action"] = "spin".into()).is_err());
        assert!(edit(|_| {}).is_ok());
    }

    #[test]
    fn round_trips_through_json() {
        let lib = default_library();
        let again = Library::from_json(&serde_json::to_string(&lib).unwrap()).unwrap();
        assert_eq!(lib, again);
    }

    proptest! {
        #[test]
        fn effects_for_respects_action(s in 0usize..8, r in 0usize..10, a in 0usize..3) {
            let lib = default_library();
            let action = Action::SEARCH_ORDER[a];
            for name in lib.effects_for(MarkShape::ALL[s], ElementRole::ALL[r], action) {
                let e = lib.effect(name).unwrap();
                prop_assert_eq!(e.action, action);
                prop_assert!(e.applies_to(MarkShape::ALL[s], ElementRole::ALL[r]));
            }
        }

        #[test]
        fn matching_presets_is_order_independent(
            classes in proptest::collection::vec((0usize..10, 0usize..8), 0..5)
        ) {
            let lib = default_library();
            let classes: Vec<_> = classes.into_iter().map(|(r, s)| (ElementRole::ALL[r], MarkShape::ALL[s])).collect();
            let mut reversed = classes.clone();
            reversed.reverse();
            let a: Vec<_> = lib.matching_presets_for(&classes).iter().map(|p| p.name.clone()).collect();
            let b: Vec<_> = lib.matching_presets_for(&reversed).iter().map(|p| p.name.clone()).collect();
            prop_assert_eq!(a, b);
        }
    }
}
