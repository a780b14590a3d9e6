//! Token vocabulary.
//!
//! | id | token | family |
//! |---|---|---|
//! | 0-4 | `move_ahead`, `move_back`, `rotate_left`, `rotate_right`, `end` | action |
//! | 5-6 | `TGT_VISIBLE`, `TGT_HIDDEN` | visibility |
//! | 7-10 | `DIR_AHEAD`, `DIR_LEFT`, `DIR_RIGHT`, `DIR_BEHIND` | direction |
//! | 11-14 | `DIST_0` (0-1), `DIST_1` (2-4), `DIST_2` (5-9), `DIST_3` (>=10) | distance |
//! | 15-18 | `FRONTIER_AHEAD`, `FRONTIER_LEFT`, `FRONTIER_RIGHT`, `FRONTIER_NONE` | frontier |
//! | 19 | `EOT` | control |

use std::ops::Range;

use crate::navsim::NavAction;

pub const VOCAB_SIZE: usize = 20;
pub const NUM_ACTIONS: usize = 5;

pub const TGT_VISIBLE: usize = 5;
pub const TGT_HIDDEN: usize = 6;
pub const DIR_AHEAD: usize = 7;
pub const DIR_LEFT: usize = 8;
pub const DIR_RIGHT: usize = 9;
pub const DIR_BEHIND: usize = 10;
pub const DIST_0: usize = 11;
pub const DIST_1: usize = 12;
pub const DIST_2: usize = 13;
pub const DIST_3: usize = 14;
pub const FRONTIER_AHEAD: usize = 15;
pub const FRONTIER_LEFT: usize = 16;
pub const FRONTIER_RIGHT: usize = 17;
pub const FRONTIER_NONE: usize = 18;
pub const EOT: usize = 19;

/// Input id fed to the recurrent core at the first position.
pub const BOS: usize = VOCAB_SIZE;

pub const ACTION_TOKENS: Range<usize> = 0..NUM_ACTIONS;
/// Tokens legal before the action in thinking mode (reasoning plus `EOT`).
pub const REASONING_TOKENS: Range<usize> = NUM_ACTIONS..VOCAB_SIZE;

pub const TOKEN_NAMES: [&str; VOCAB_SIZE] = [
    "move_ahead",
    "move_back",
    "rotate_left",
    "rotate_right",
    "end",
    "TGT_VISIBLE",
    "TGT_HIDDEN",
    "DIR_AHEAD",
    "DIR_LEFT",
    "DIR_RIGHT",
    "DIR_BEHIND",
    "DIST_0",
    "DIST_1",
    "DIST_2",
    "DIST_3",
    "FRONTIER_AHEAD",
    "FRONTIER_LEFT",
    "FRONTIER_RIGHT",
    "FRONTIER_NONE",
    "EOT",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Action,
    Visibility,
    Direction,
    Distance,
    Frontier,
    Control,
}

impl Family {
    pub fn members(self) -> Range<usize> {
        match self {
            Family::Action => ACTION_TOKENS,
            Family::Visibility => TGT_VISIBLE..DIR_AHEAD,
            Family::Direction => DIR_AHEAD..DIST_0,
            Family::Distance => DIST_0..FRONTIER_AHEAD,
            Family::Frontier => FRONTIER_AHEAD..EOT,
            Family::Control => EOT..VOCAB_SIZE,
        }
    }
}

pub fn family(token: usize) -> Family {
    match token {
        0..=4 => Family::Action,
        5..=6 => Family::Visibility,
        7..=10 => Family::Direction,
        11..=14 => Family::Distance,
        15..=18 => Family::Frontier,
        _ => Family::Control,
    }
}

pub fn is_action(token: usize) -> bool {
    token < NUM_ACTIONS
}

pub fn action_token(a: NavAction) -> usize {
    a.id()
}

/// Distance bucket token for a geodesic step count.
pub fn distance_bucket(d: u32) -> usize {
    match d {
        0..=1 => DIST_0,
        2..=4 => DIST_1,
        5..=9 => DIST_2,
        _ => DIST_3,
    }
}

/// Action implied by a reasoning trace.
///
/// `TGT_VISIBLE` with a near bucket (`DIST_0` or `DIST_1`, i.e. within four
/// steps) implies `end`; otherwise the last direction token decides:
/// ahead → `move_ahead`, left → `rotate_left`, right → `rotate_right`,
/// behind → `rotate_left`. `None` when the trace carries no direction and
/// does not imply `end`.
pub fn implied_action(trace: &[usize]) -> Option<NavAction> {
    let visible = trace.contains(&TGT_VISIBLE);
    let near = trace.iter().any(|&t| t == DIST_0 || t == DIST_1);
    if visible && near {
        return Some(NavAction::End);
    }
    trace.iter().rev().find_map(|&t| match t {
        DIR_AHEAD => Some(NavAction::MoveAhead),
        DIR_LEFT => Some(NavAction::RotateLeft),
        DIR_RIGHT => Some(NavAction::RotateRight),
        DIR_BEHIND => Some(NavAction::RotateLeft),
        _ => None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocab_layout() {
        assert_eq!(TOKEN_NAMES.len(), 20);
        for a in NavAction::ALL {
            assert_eq!(TOKEN_NAMES[a.id()], a.name());
            assert!(is_action(action_token(a)));
        }
        let total: usize = [
            Family::Action,
            Family::Visibility,
            Family::Direction,
            Family::Distance,
            Family::Frontier,
            Family::Control,
        ]
        .iter()
        .map(|f| f.members().len())
        .sum();
        assert_eq!(total, VOCAB_SIZE);
        for t in 0..VOCAB_SIZE {
            assert!(family(t).members().contains(&t));
        }
    }

    #[test]
    fn buckets() {
        assert_eq!(distance_bucket(0), DIST_0);
        assert_eq!(distance_bucket(1), DIST_0);
        assert_eq!(distance_bucket(4), DIST_1);
        assert_eq!(distance_bucket(9), DIST_2);
        assert_eq!(distance_bucket(10), DIST_3);
    }

    #[test]
    fn implied_action_rule() {
        assert_eq!(
            implied_action(&[TGT_VISIBLE, DIST_0, FRONTIER_NONE, DIR_LEFT]),
            Some(NavAction::End)
        );
        assert_eq!(
            implied_action(&[TGT_VISIBLE, DIST_1, FRONTIER_NONE, DIR_LEFT]),
            Some(NavAction::End)
        );
        assert_eq!(
            implied_action(&[TGT_VISIBLE, DIST_2, FRONTIER_NONE, DIR_LEFT]),
            Some(NavAction::RotateLeft)
        );
        assert_eq!(
            implied_action(&[TGT_HIDDEN, DIST_0, FRONTIER_NONE, DIR_AHEAD]),
            Some(NavAction::MoveAhead)
        );
        assert_eq!(
            implied_action(&[TGT_HIDDEN, DIST_3, FRONTIER_LEFT, DIR_BEHIND]),
            Some(NavAction::RotateLeft)
        );
        assert_eq!(
            implied_action(&[TGT_HIDDEN, DIST_3, FRONTIER_LEFT, DIR_RIGHT]),
            Some(NavAction::RotateRight)
        );
        assert_eq!(implied_action(&[TGT_HIDDEN]), None);
    }
}
