//! Policy input: instruction, short-term windows, map features and mode prompt.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::navsim::{NavAction, Observation, ViewCell};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    NoThink,
    Think,
}

impl Mode {
    pub fn index(self) -> usize {
        match self {
            Mode::NoThink => 0,
            Mode::Think => 1,
        }
    }
}

/// `x_t`: the instruction, the last `w` observations (oldest first), the last
/// `w - 1` actions, pooled map features and the mode prompt. Missing history
/// is padded with `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyContext {
    pub instruction: u8,
    pub obs_window: Vec<Option<Observation>>,
    pub action_window: Vec<Option<NavAction>>,
    pub map_feats: Vec<f64>,
    pub mode: Mode,
}

impl PolicyContext {
    pub fn with_mode(&self, mode: Mode) -> Self {
        Self { mode, ..self.clone() }
    }
}

/// Cell classes seen by the encoder; objects are classed relative to the instruction.
pub const CELL_CLASSES: usize = 7;
/// Pad plus the five actions.
pub const ACTION_CLASSES: usize = 6;

pub fn cell_class(cell: Option<ViewCell>, target: u8) -> usize {
    match cell {
        None => 0,
        Some(ViewCell::Unknown) => 1,
        Some(ViewCell::Wall) => 2,
        Some(ViewCell::Free) => 3,
        Some(ViewCell::Object { category, .. }) if category == target => 4,
        Some(ViewCell::Object { landmark: true, .. }) => 5,
        Some(ViewCell::Object { .. }) => 6,
    }
}

pub fn action_class(a: Option<NavAction>) -> usize {
    a.map_or(0, |a| a.id() + 1)
}

/// Rolling short-term memory used while an episode runs.
#[derive(Debug, Clone)]
pub struct History {
    window: usize,
    obs: VecDeque<Observation>,
    actions: VecDeque<NavAction>,
}

impl History {
    pub fn new(window: usize, first: Observation) -> Self {
        Self {
            window,
            obs: VecDeque::from([first]),
            actions: VecDeque::new(),
        }
    }

    pub fn push(&mut self, action: NavAction, obs: Observation) {
        self.actions.push_back(action);
        self.obs.push_back(obs);
        while self.obs.len() > self.window {
            self.obs.pop_front();
        }
        while self.actions.len() > self.window.saturating_sub(1) {
            self.actions.pop_front();
        }
    }

    pub fn context(&self, instruction: u8, map_feats: Vec<f64>, mode: Mode) -> PolicyContext {
        let mut obs_window = vec![None; self.window - self.obs.len()];
        obs_window.extend(self.obs.iter().cloned().map(Some));
        let slots = self.window.saturating_sub(1);
        let mut action_window = vec![None; slots - self.actions.len()];
        action_window.extend(self.actions.iter().copied().map(Some));
        PolicyContext {
            instruction,
            obs_window,
            action_window,
            map_feats,
            mode,
        }
    }

    pub fn last_observation(&self) -> &Observation {
        self.obs.back().expect("history holds at least one observation")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::navsim::ViewGeometry;

    fn obs(tag: u8) -> Observation {
        Observation {
            geometry: ViewGeometry::default(),
            ego_view: vec![ViewCell::Free; 35],
            target_category: tag,
        }
    }

    #[test]
    fn history_pads_then_slides() {
        let mut h = History::new(4, obs(0));
        let c = h.context(0, vec![], Mode::NoThink);
        assert_eq!(c.obs_window.len(), 4);
        assert_eq!(c.obs_window.iter().filter(|o| o.is_none()).count(), 3);
        assert_eq!(c.action_window, vec![None, None, None]);
        for i in 1..=5u8 {
            h.push(NavAction::MoveAhead, obs(i));
        }
        let c = h.context(0, vec![], Mode::Think);
        assert!(c.obs_window.iter().all(|o| o.is_some()));
        assert_eq!(c.obs_window[3].as_ref().unwrap().target_category, 5);
        assert_eq!(c.obs_window[0].as_ref().unwrap().target_category, 2);
        assert_eq!(c.action_window.len(), 3);
    }

    #[test]
    fn classes_are_relative_to_instruction() {
        let t = Some(ViewCell::Object {
            category: 3,
            landmark: false,
        });
        assert_eq!(cell_class(t, 3), 4);
        assert_eq!(cell_class(t, 4), 6);
        assert_eq!(
            cell_class(
                Some(ViewCell::Object {
                    category: 1,
                    landmark: true
                }),
                4
            ),
            5
        );
        assert_eq!(cell_class(None, 0), 0);
        assert_eq!(action_class(Some(NavAction::End)), 5);
    }
}
