//! Episode state, transitions and reward shaping.
//!
//! `reward = -0.01 + 10 * success + max(0, d_prev - d_now)` where `d` is the
//! geodesic distance to the nearest target instance.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::house::GridHouse;
use super::oracle::{next_pose, HouseOracle};
use super::view::{observe, Observation, ViewGeometry};
use super::{AgentPose, NavAction, NavError};

pub const STEP_PENALTY: f64 = -0.01;
pub const SUCCESS_REWARD: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub max_steps: u32,
    pub success_radius: u32,
    pub view: ViewGeometry,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            max_steps: 300,
            success_radius: 4,
            view: ViewGeometry::default(),
        }
    }
}

impl EnvConfig {
    /// Evaluation setting: longer horizon.
    pub fn evaluation() -> Self {
        Self {
            max_steps: 600,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardTerms {
    pub penalty: f64,
    pub success: f64,
    pub distance: f64,
}

impl RewardTerms {
    pub fn total(&self) -> f64 {
        self.penalty + self.success + self.distance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub terms: RewardTerms,
    pub done: bool,
    pub success: bool,
    /// Distance before and after the step.
    pub geodesic_before: u32,
    pub geodesic_to_target: u32,
    /// Clock after the step (number of actions taken so far).
    pub clock: u32,
}

/// One line of a step trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub clock: u32,
    pub pose: AgentPose,
    pub action: usize,
    pub reward: f64,
    pub done: bool,
    pub success: bool,
    pub geodesic: u32,
}

/// Mutable per-episode state. The house and oracle are shared read-only.
#[derive(Debug, Clone)]
pub struct EpisodeState {
    house: Arc<GridHouse>,
    oracle: Arc<HouseOracle>,
    cfg: EnvConfig,
    pose: AgentPose,
    clock: u32,
    done: bool,
    success: bool,
}

impl EpisodeState {
    pub fn reset(house: Arc<GridHouse>, cfg: EnvConfig) -> (Self, Observation) {
        let oracle = Arc::new(HouseOracle::new(&house, cfg.success_radius, cfg.view));
        Self::reset_with_oracle(house, oracle, cfg)
    }

    /// Reset reusing a precomputed oracle (it must match `house` and `cfg`).
    pub fn reset_with_oracle(house: Arc<GridHouse>, oracle: Arc<HouseOracle>, cfg: EnvConfig) -> (Self, Observation) {
        let pose = house.start_pose;
        let obs = observe(&house, pose, cfg.view);
        let state = Self {
            house,
            oracle,
            cfg,
            pose,
            clock: 0,
            done: false,
            success: false,
        };
        (state, obs)
    }

    pub fn house(&self) -> &GridHouse {
        &self.house
    }

    pub fn house_arc(&self) -> &Arc<GridHouse> {
        &self.house
    }

    pub fn oracle(&self) -> &HouseOracle {
        &self.oracle
    }

    pub fn oracle_arc(&self) -> &Arc<HouseOracle> {
        &self.oracle
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn pose(&self) -> AgentPose {
        self.pose
    }

    pub fn clock(&self) -> u32 {
        self.clock
    }

    pub fn done(&self) -> bool {
        self.done
    }

    pub fn success(&self) -> bool {
        self.success
    }

    pub fn geodesic(&self) -> u32 {
        self.oracle
            .geodesic(self.pose.pos())
            .expect("agent stays in the target's component")
    }

    pub fn observation(&self) -> Observation {
        observe(&self.house, self.pose, self.cfg.view)
    }

    /// Whether `end` would succeed right now.
    pub fn success_available(&self) -> bool {
        self.oracle.is_goal(self.pose)
    }

    pub fn step(&mut self, action: NavAction) -> Result<StepOutcome, NavError> {
        if self.done {
            return Err(NavError::EpisodeDone { clock: self.clock });
        }
        let before = self.geodesic();
        let mut success = false;
        if action == NavAction::End {
            let obs = self.observation();
            success = obs.target_visible() && before <= self.cfg.success_radius;
            self.done = true;
        } else {
            self.pose = next_pose(&self.house, self.pose, action);
        }
        self.clock += 1;
        if self.clock >= self.cfg.max_steps {
            self.done = true;
        }
        self.success = success;
        let after = self.geodesic();
        let terms = RewardTerms {
            penalty: STEP_PENALTY,
            success: if success { SUCCESS_REWARD } else { 0.0 },
            distance: if after < before { f64::from(before - after) } else { 0.0 },
        };
        Ok(StepOutcome {
            observation: self.observation(),
            reward: terms.total(),
            terms,
            done: self.done,
            success,
            geodesic_before: before,
            geodesic_to_target: after,
            clock: self.clock,
        })
    }

    pub fn record(&self, action: NavAction, outcome: &StepOutcome) -> StepRecord {
        StepRecord {
            clock: outcome.clock,
            pose: self.pose,
            action: action.id(),
            reward: outcome.reward,
            done: outcome.done,
            success: outcome.success,
            geodesic: outcome.geodesic_to_target,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::navsim::house::{generate_house, house_from_ascii, GenParams};
    use crate::navsim::oracle::expert_action;
    use crate::navsim::view::ViewCell;
    use crate::navsim::Heading;

    fn open_room(start: AgentPose) -> Arc<GridHouse> {
        Arc::new(house_from_ascii(
            &[
                "##########",
                "#........#",
                "#........#",
                "#......5.#",
                "#........#",
                "##########",
            ],
            5,
            start,
            0,
        ))
    }

    #[test]
    fn reset_is_deterministic() {
        let h = Arc::new(generate_house(7, &GenParams::default()).unwrap());
        let (_, a) = EpisodeState::reset(h.clone(), EnvConfig::default());
        let (_, b) = EpisodeState::reset(h, EnvConfig::default());
        assert_eq!(a, b);
    }

    #[test]
    fn wall_ahead_at_start() {
        let h = Arc::new(house_from_ascii(
            &["#####", "#...#", "#.1.#", "#...#", "#####"],
            1,
            AgentPose::new(2, 1, Heading::N),
            0,
        ));
        let (_, obs) = EpisodeState::reset(h, EnvConfig::default());
        assert_eq!(obs.cell(0, 2), ViewCell::Wall);
    }

    #[test]
    fn target_in_initial_view() {
        let h = open_room(AgentPose::new(1, 3, Heading::E));
        let (_, obs) = EpisodeState::reset(h, EnvConfig::default());
        assert!(obs.target_visible());
    }

    #[test]
    fn rotation_costs_the_step_penalty() {
        let (mut s, _) = EpisodeState::reset(open_room(AgentPose::new(1, 1, Heading::E)), EnvConfig::default());
        let out = s.step(NavAction::RotateLeft).unwrap();
        assert_eq!(out.reward, -0.01);
    }

    #[test]
    fn approaching_move_earns_distance() {
        let (mut s, _) = EpisodeState::reset(open_room(AgentPose::new(1, 3, Heading::E)), EnvConfig::default());
        let out = s.step(NavAction::MoveAhead).unwrap();
        assert_eq!(out.geodesic_before - out.geodesic_to_target, 1);
        assert_eq!(out.reward, -0.01 + 1.0);
    }

    #[test]
    fn receding_move_is_not_penalized() {
        let (mut s, _) = EpisodeState::reset(open_room(AgentPose::new(3, 3, Heading::E)), EnvConfig::default());
        let out = s.step(NavAction::MoveBack).unwrap();
        assert_eq!(out.geodesic_to_target, out.geodesic_before + 1);
        assert_eq!(out.reward, -0.01);
    }

    #[test]
    fn end_near_visible_target_succeeds() {
        let (mut s, _) = EpisodeState::reset(open_room(AgentPose::new(5, 3, Heading::E)), EnvConfig::default());
        assert_eq!(s.geodesic(), 2);
        let out = s.step(NavAction::End).unwrap();
        assert!(out.success && out.done);
        assert_eq!(out.reward, -0.01 + 10.0);
        assert!(matches!(s.step(NavAction::End), Err(NavError::EpisodeDone { .. })));
    }

    #[test]
    fn end_without_view_fails() {
        let (mut s, _) = EpisodeState::reset(open_room(AgentPose::new(5, 3, Heading::W)), EnvConfig::default());
        let out = s.step(NavAction::End).unwrap();
        assert!(out.done && !out.success);
        assert_eq!(out.reward, -0.01);
    }

    #[test]
    fn collision_leaves_pose() {
        let (mut s, _) = EpisodeState::reset(open_room(AgentPose::new(1, 1, Heading::N)), EnvConfig::default());
        s.step(NavAction::MoveAhead).unwrap();
        assert_eq!(s.pose(), AgentPose::new(1, 1, Heading::N));
    }

    #[test]
    fn horizon_truncates() {
        let cfg = EnvConfig {
            max_steps: 2,
            ..EnvConfig::default()
        };
        let (mut s, _) = EpisodeState::reset(open_room(AgentPose::new(1, 1, Heading::N)), cfg);
        assert!(!s.step(NavAction::RotateLeft).unwrap().done);
        let out = s.step(NavAction::RotateLeft).unwrap();
        assert!(out.done && !out.success);
    }

    #[test]
    fn expert_ends_when_success_available() {
        let (s, _) = EpisodeState::reset(open_room(AgentPose::new(4, 3, Heading::E)), EnvConfig::default());
        assert!(s.success_available());
        assert_eq!(expert_action(&s).unwrap(), NavAction::End);
    }
}
