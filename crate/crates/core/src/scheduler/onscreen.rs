use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::animation::Action;
use crate::chart::ChartDocument;
use crate::narration::Millis;

use super::{AnimationSequence, AnimationUnit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flip {
    pub t: Millis,
    pub visible: bool,
}

/// A step function: `initial` until the first flip, then the value of the
/// latest flip at or before `t`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Visibility {
    pub initial: bool,
    pub flips: Vec<Flip>,
}

impl Visibility {
    pub fn at(&self, t: Millis) -> bool {
        self.flips
            .iter()
            .take_while(|f| f.t <= t)
            .last()
            .map_or(self.initial, |f| f.visible)
    }

    /// Builds the visibility of `id`: hidden from 0 when some unit enters
    /// it, visible otherwise; enter ends turn it on, exit ends turn it off.
    pub fn from_units<'a>(units: impl IntoIterator<Item = &'a AnimationUnit>, id: &str) -> Visibility {
        let mine: Vec<&AnimationUnit> = units.into_iter().filter(|u| u.element_ids.contains(id)).collect();
        let initial = !mine.iter().any(|u| u.action == Action::Enter);
        let mut flips: Vec<Flip> = mine
            .iter()
            .filter_map(|u| match u.action {
                Action::Enter => Some(Flip {
                    t: u.end(),
                    visible: true,
                }),
                Action::Exit => Some(Flip {
                    t: u.end(),
                    visible: false,
                }),
                Action::Emphasize => None,
            })
            .collect();
        flips.sort_by_key(|f| f.t);
        Visibility { initial, flips }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OnScreenTable {
    pub entries: BTreeMap<String, Visibility>,
}

impl OnScreenTable {
    pub fn visible(&self, id: &str, t: Millis) -> Option<bool> {
        self.entries.get(id).map(|v| v.at(t))
    }
}

pub fn on_screen_table(seq: &AnimationSequence, doc: &ChartDocument) -> OnScreenTable {
    OnScreenTable {
        entries: doc
            .elements
            .iter()
            .map(|e| (e.id.clone(), Visibility::from_units(&seq.units, &e.id)))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn unit(id: &str, action: Action, start: Millis, duration: Millis) -> AnimationUnit {
        AnimationUnit {
            element_ids: BTreeSet::from([id.to_string()]),
            start,
            duration,
            action,
            effect: "fade-in".into(),
            element_effects: BTreeMap::from([(id.to_string(), "fade-in".to_string())]),
            link_index: Some(0),
        }
    }

    #[test]
    fn enter_flips_at_end() {
        let v = Visibility::from_units(&[unit("a", Action::Enter, 1000, 400)], "a");
        assert!(!v.at(0));
        assert!(!v.at(1399));
        assert!(v.at(1400));
        assert!(v.at(9000));
    }

    #[test]
    fn untouched_is_visible() {
        let v = Visibility::from_units(&[unit("a", Action::Enter, 1000, 400)], "b");
        assert!(v.at(0) && v.at(5000));
        assert!(v.flips.is_empty());
    }

    #[test]
    fn enter_then_exit() {
        let units = [unit("a", Action::Enter, 100, 100), unit("a", Action::Exit, 500, 100)];
        let v = Visibility::from_units(&units, "a");
        assert!(!v.at(150));
        assert!(v.at(300));
        assert!(v.at(599));
        assert!(!v.at(600));
    }

    #[test]
    fn emphasis_does_not_flip() {
        let v = Visibility::from_units(&[unit("a", Action::Emphasize, 100, 100)], "a");
        assert!(v.initial && v.flips.is_empty());
    }
}
