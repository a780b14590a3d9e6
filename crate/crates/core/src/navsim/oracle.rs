//! Shortest-path oracles and the privileged expert.

use std::collections::VecDeque;

use super::env::{EnvConfig, EpisodeState};
use super::house::GridHouse;
use super::view::{observe, ViewGeometry};
use super::{AgentPose, Heading, NavAction, NavError, Pos};

/// Multi-source BFS over free cells. `None` marks unreachable cells (and walls).
pub fn distance_field(house: &GridHouse, sources: &[Pos]) -> Vec<Option<u32>> {
    let mut dist = vec![None; house.cells.len()];
    let mut queue = VecDeque::new();
    for &s in sources {
        if house.is_free(s) && dist[house.index(s)].is_none() {
            dist[house.index(s)] = Some(0);
            queue.push_back(s);
        }
    }
    while let Some(p) = queue.pop_front() {
        let d = dist[house.index(p)].unwrap();
        for n in p.neighbors4() {
            if house.is_free(n) && dist[house.index(n)].is_none() {
                dist[house.index(n)] = Some(d + 1);
                queue.push_back(n);
            }
        }
    }
    dist
}

/// BFS length from `from` to the nearest member of `to_set`; `Ok(None)` when unreachable.
pub fn geodesic_distance(house: &GridHouse, from: Pos, to_set: &[Pos]) -> Result<Option<u32>, NavError> {
    if to_set.is_empty() {
        return Err(NavError::EmptyTargetSet);
    }
    if !house.is_free(from) {
        return Err(NavError::NotFree { x: from.x, y: from.y });
    }
    Ok(distance_field(house, to_set)[house.index(from)])
}

/// Pose reached by taking `action` at `pose`. Blocked moves leave the pose unchanged.
pub fn next_pose(house: &GridHouse, pose: AgentPose, action: NavAction) -> AgentPose {
    let (fx, fy) = pose.heading.forward();
    match action {
        NavAction::MoveAhead | NavAction::MoveBack => {
            let s = if action == NavAction::MoveAhead { 1 } else { -1 };
            let dest = Pos::new(pose.x + s * fx, pose.y + s * fy);
            if house.is_free(dest) {
                AgentPose {
                    x: dest.x,
                    y: dest.y,
                    ..pose
                }
            } else {
                pose
            }
        }
        NavAction::RotateLeft => AgentPose {
            heading: pose.heading.turn_left(),
            ..pose
        },
        NavAction::RotateRight => AgentPose {
            heading: pose.heading.turn_right(),
            ..pose
        },
        NavAction::End => pose,
    }
}

/// Per-house precomputation shared by all episodes on that house.
#[derive(Debug, Clone)]
pub struct HouseOracle {
    width: usize,
    /// Geodesic distance of every cell to the nearest target instance.
    pub target_field: Vec<Option<u32>>,
    /// Whether `end` succeeds at each pose (`cell * 4 + heading`).
    pub goal: Vec<bool>,
    /// Fewest moves/rotations from each pose to a goal pose.
    pub to_goal: Vec<Option<u32>>,
}

impl HouseOracle {
    pub fn new(house: &GridHouse, success_radius: u32, geometry: ViewGeometry) -> Self {
        let target_field = distance_field(house, &house.target_cells());
        let n = house.cells.len() * 4;
        let mut goal = vec![false; n];
        for (cell, d) in target_field.iter().enumerate() {
            if !matches!(d, Some(d) if *d <= success_radius) {
                continue;
            }
            let p = house.pos_of(cell);
            for h in Heading::ALL {
                let pose = AgentPose::new(p.x, p.y, h);
                goal[cell * 4 + h.index()] = observe(house, pose, geometry).target_visible();
            }
        }

        // Reverse BFS from goal poses over the four motion actions.
        let mut preds: Vec<Vec<u32>> = vec![Vec::new(); n];
        for cell in 0..house.cells.len() {
            let p = house.pos_of(cell);
            if !house.is_free(p) {
                continue;
            }
            for h in Heading::ALL {
                let pose = AgentPose::new(p.x, p.y, h);
                let s = Self::state_of(house.width, pose);
                for a in MOTIONS {
                    let t = Self::state_of(house.width, next_pose(house, pose, a));
                    if t != s {
                        preds[t].push(s as u32);
                    }
                }
            }
        }
        let mut to_goal = vec![None; n];
        let mut queue = VecDeque::new();
        for (s, &g) in goal.iter().enumerate() {
            if g {
                to_goal[s] = Some(0);
                queue.push_back(s);
            }
        }
        while let Some(s) = queue.pop_front() {
            let d = to_goal[s].unwrap();
            for &p in &preds[s] {
                if to_goal[p as usize].is_none() {
                    to_goal[p as usize] = Some(d + 1);
                    queue.push_back(p as usize);
                }
            }
        }
        Self {
            width: house.width,
            target_field,
            goal,
            to_goal,
        }
    }

    fn state_of(width: usize, pose: AgentPose) -> usize {
        (pose.y as usize * width + pose.x as usize) * 4 + pose.heading.index()
    }

    pub fn is_goal(&self, pose: AgentPose) -> bool {
        self.goal[Self::state_of(self.width, pose)]
    }

    pub fn moves_to_goal(&self, pose: AgentPose) -> Option<u32> {
        self.to_goal[Self::state_of(self.width, pose)]
    }

    pub fn geodesic(&self, p: Pos) -> Option<u32> {
        self.target_field[p.y as usize * self.width + p.x as usize]
    }

    /// Optimal action count from `pose`, including the final `end`.
    pub fn episode_length_from(&self, pose: AgentPose) -> Option<u32> {
        self.moves_to_goal(pose).map(|d| d + 1)
    }

    /// Expert choice at `pose`: `end` when it succeeds, else the first motion of
    /// an optimal sequence, ties broken ahead > left > right > back.
    pub fn expert_at(&self, house: &GridHouse, pose: AgentPose) -> Result<NavAction, NavError> {
        if self.is_goal(pose) {
            return Ok(NavAction::End);
        }
        let here = self
            .moves_to_goal(pose)
            .ok_or(NavError::Unreachable { x: pose.x, y: pose.y })?;
        for a in EXPERT_ORDER {
            if let Some(d) = self.moves_to_goal(next_pose(house, pose, a)) {
                if d + 1 == here {
                    return Ok(a);
                }
            }
        }
        unreachable!("a pose with finite distance has an improving motion")
    }
}

const MOTIONS: [NavAction; 4] = [
    NavAction::MoveAhead,
    NavAction::MoveBack,
    NavAction::RotateLeft,
    NavAction::RotateRight,
];

const EXPERT_ORDER: [NavAction; 4] = [
    NavAction::MoveAhead,
    NavAction::RotateLeft,
    NavAction::RotateRight,
    NavAction::MoveBack,
];

/// Minimal number of actions (rotations and the final `end` included) an
/// oracle needs from the start pose. `None` when no goal pose is reachable.
pub fn shortest_episode_length(house: &GridHouse, cfg: &EnvConfig) -> Option<u32> {
    HouseOracle::new(house, cfg.success_radius, cfg.view).episode_length_from(house.start_pose)
}

/// The privileged shortest-path expert for the current episode state.
pub fn expert_action(state: &EpisodeState) -> Result<NavAction, NavError> {
    if state.done() {
        return Err(NavError::EpisodeDone { clock: state.clock() });
    }
    state.oracle().expert_at(state.house(), state.pose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::navsim::house::house_from_ascii;
    use std::sync::Arc;

    fn corridor() -> GridHouse {
        house_from_ascii(
            &["#######", "#.....#", "#######"],
            9,
            AgentPose::new(1, 1, Heading::E),
            0,
        )
    }

    #[test]
    fn geodesic_basics() {
        let h = corridor();
        let a = Pos::new(1, 1);
        let b = Pos::new(5, 1);
        assert_eq!(geodesic_distance(&h, a, &[a]).unwrap(), Some(0));
        assert_eq!(geodesic_distance(&h, a, &[b]).unwrap(), Some(4));
        assert_eq!(geodesic_distance(&h, a, &[]), Err(NavError::EmptyTargetSet));
    }

    #[test]
    fn walled_off_target_is_unreachable() {
        let h = house_from_ascii(
            &["#######", "#..#..#", "#######"],
            9,
            AgentPose::new(1, 1, Heading::E),
            0,
        );
        assert_eq!(geodesic_distance(&h, Pos::new(1, 1), &[Pos::new(5, 1)]).unwrap(), None);
    }

    #[test]
    fn start_in_goal_needs_only_end() {
        let h = house_from_ascii(
            &["#######", "#...5.#", "#######"],
            5,
            AgentPose::new(1, 1, Heading::E),
            0,
        );
        assert_eq!(shortest_episode_length(&h, &EnvConfig::default()), Some(1));
    }

    #[test]
    fn aligned_corridor_one_past_radius() {
        // target 5 cells ahead: one move brings it within radius 4 and still in view
        let h = house_from_ascii(
            &["#########", "#.....5.#", "#########"],
            5,
            AgentPose::new(1, 1, Heading::E),
            0,
        );
        assert_eq!(shortest_episode_length(&h, &EnvConfig::default()), Some(2));
    }

    #[test]
    fn expert_prefers_rotate_left_when_waypoint_behind() {
        // the target lies behind the agent along a corridor; the agent must turn
        // around (two rotations) either way, and left wins the tie.
        let h = Arc::new(house_from_ascii(
            &["############", "#5.........#", "############"],
            5,
            AgentPose::new(8, 1, Heading::E),
            0,
        ));
        let (state, _) = EpisodeState::reset(h.clone(), EnvConfig::default());
        assert_eq!(expert_action(&state).unwrap(), NavAction::RotateLeft);
    }

    #[test]
    fn expert_moves_ahead_toward_aligned_target() {
        let h = Arc::new(house_from_ascii(
            &["############", "#.........5#", "############"],
            5,
            AgentPose::new(2, 1, Heading::E),
            0,
        ));
        let (state, _) = EpisodeState::reset(h, EnvConfig::default());
        assert_eq!(expert_action(&state).unwrap(), NavAction::MoveAhead);
    }
}
