//! Annotated semantic map: the agent's long-term memory.
//!
//! The map accumulates explored cells with their occupancy, the agent's
//! trajectory and landmark annotations (furniture-like objects and target
//! instances). It is pooled into a fixed-length feature vector for the policy,
//! rendered to a pixmap for entropy heatmaps and can be synthetically corrupted.

mod corrupt;
mod features;
mod render;

pub use corrupt::corrupt_map;
pub use features::{map_features, MapFeatureConfig};
pub use render::{heat_color, render_map, Pixmap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::navsim::{AgentPose, Observation, Pos, ViewCell};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("observation geometry mismatch: {0}")]
    GeometryMismatch(String),
    #[error("overlay has {got} values but the trajectory has {expected} waypoints")]
    OverlayLength { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Occupancy {
    Unknown,
    Wall,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Landmark {
    pub pos: Pos,
    pub category: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedMap {
    pub width: usize,
    pub height: usize,
    pub num_categories: usize,
    pub target_category: u8,
    pub explored: Vec<bool>,
    pub occupancy: Vec<Occupancy>,
    /// Poses visited, consecutive duplicates collapsed.
    pub trajectory: Vec<AgentPose>,
    pub landmarks: Vec<Landmark>,
    pub current_pose: Option<AgentPose>,
}

impl AnnotatedMap {
    pub fn new(width: usize, height: usize, num_categories: usize, target_category: u8) -> Self {
        Self {
            width,
            height,
            num_categories,
            target_category,
            explored: vec![false; width * height],
            occupancy: vec![Occupancy::Unknown; width * height],
            trajectory: Vec::new(),
            landmarks: Vec::new(),
            current_pose: None,
        }
    }

    pub fn in_bounds(&self, p: Pos) -> bool {
        p.x >= 0 && p.y >= 0 && (p.x as usize) < self.width && (p.y as usize) < self.height
    }

    pub fn index(&self, p: Pos) -> usize {
        p.y as usize * self.width + p.x as usize
    }

    pub fn is_explored(&self, p: Pos) -> bool {
        self.in_bounds(p) && self.explored[self.index(p)]
    }

    pub fn occupancy_at(&self, p: Pos) -> Occupancy {
        if self.in_bounds(p) {
            self.occupancy[self.index(p)]
        } else {
            Occupancy::Unknown
        }
    }

    pub fn explored_count(&self) -> usize {
        self.explored.iter().filter(|&&e| e).count()
    }

    pub fn target_landmarks(&self) -> impl Iterator<Item = &Landmark> {
        self.landmarks
            .iter()
            .filter(move |l| l.category == self.target_category)
    }

    /// Integrates an observation taken at `pose`.
    ///
    /// Idempotent for a repeated `(pose, obs)` pair: the pose is only appended
    /// to the trajectory when it differs from the last waypoint.
    pub fn update(&mut self, pose: AgentPose, obs: &Observation) -> Result<(), MapError> {
        let g = obs.geometry;
        if obs.ego_view.len() != g.cells() {
            return Err(MapError::GeometryMismatch(format!(
                "view has {} cells, geometry expects {}",
                obs.ego_view.len(),
                g.cells()
            )));
        }
        let here = pose.pos();
        if !self.in_bounds(here) {
            return Err(MapError::GeometryMismatch(format!(
                "pose ({}, {}) outside the map",
                pose.x, pose.y
            )));
        }
        let mut updates = Vec::new();
        for row in 0..g.depth {
            for col in 0..g.width {
                let cell = obs.cell(row, col);
                if !cell.is_known() {
                    continue;
                }
                let (f, r) = g.offsets(row, col);
                let world = pose.ego_to_world(f, r);
                if !self.in_bounds(world) {
                    return Err(MapError::GeometryMismatch(format!(
                        "known view cell projects outside the map at ({}, {})",
                        world.x, world.y
                    )));
                }
                updates.push((world, cell));
            }
        }
        for (world, cell) in updates {
            let i = self.index(world);
            self.explored[i] = true;
            self.occupancy[i] = match cell {
                ViewCell::Wall => Occupancy::Wall,
                _ => Occupancy::Free,
            };
            if let ViewCell::Object { category, landmark } = cell {
                if landmark || category == self.target_category {
                    let lm = Landmark { pos: world, category };
                    if !self.landmarks.contains(&lm) {
                        self.landmarks.push(lm);
                    }
                }
            }
        }
        // The agent stands on a free cell.
        let i = self.index(here);
        self.occupancy[i] = Occupancy::Free;
        if self.trajectory.last() != Some(&pose) {
            self.trajectory.push(pose);
        }
        self.current_pose = Some(pose);
        Ok(())
    }

    /// Functional form of [`AnnotatedMap::update`].
    pub fn updated(&self, pose: AgentPose, obs: &Observation) -> Result<Self, MapError> {
        let mut next = self.clone();
        next.update(pose, obs)?;
        Ok(next)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("map serialization is infallible")
    }

    /// Nearest frontier cell (explored free cell with an unexplored neighbour),
    /// by BFS over explored free cells from the current pose.
    pub fn nearest_frontier(&self) -> Option<Pos> {
        let start = self.current_pose?.pos();
        let mut seen = vec![false; self.width * self.height];
        let mut queue = std::collections::VecDeque::from([start]);
        seen[self.index(start)] = true;
        while let Some(p) = queue.pop_front() {
            let neighbors = p.neighbors4();
            if neighbors
                .iter()
                .any(|&n| self.in_bounds(n) && !self.explored[self.index(n)])
            {
                return Some(p);
            }
            for n in neighbors {
                if self.in_bounds(n) && !seen[self.index(n)] && self.occupancy[self.index(n)] == Occupancy::Free {
                    seen[self.index(n)] = true;
                    queue.push_back(n);
                }
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::navsim::house::{generate_house, house_from_ascii, GenParams};
    use crate::navsim::view::observe;
    use crate::navsim::{EnvConfig, EpisodeState, Heading, NavAction};
    use std::sync::Arc;

    #[test]
    fn first_update_explores_known_cells() {
        let h = Arc::new(generate_house(7, &GenParams::default()).unwrap());
        let (s, obs) = EpisodeState::reset(h.clone(), EnvConfig::default());
        let mut m = AnnotatedMap::new(h.width, h.height, 12, h.target_category);
        m.update(s.pose(), &obs).unwrap();
        assert_eq!(m.explored_count(), obs.known_cells());
        assert_eq!(m.trajectory.len(), 1);
    }

    #[test]
    fn update_is_idempotent() {
        let h = Arc::new(generate_house(5, &GenParams::default()).unwrap());
        let (s, obs) = EpisodeState::reset(h.clone(), EnvConfig::default());
        let m0 = AnnotatedMap::new(h.width, h.height, 12, h.target_category);
        let m1 = m0.updated(s.pose(), &obs).unwrap();
        let m2 = m1.updated(s.pose(), &obs).unwrap();
        assert_eq!(m1, m2);
    }

    #[test]
    fn landmark_chair_is_recorded() {
        // category 2 is a landmark (below 6); 9 is the target, not in view
        let h = house_from_ascii(
            &["#######", "#.....#", "#..2..#", "#.....#", "#9....#", "#######"],
            9,
            AgentPose::new(3, 4, Heading::N),
            6,
        );
        let pose = AgentPose::new(3, 4, Heading::N);
        let obs = observe(&h, pose, Default::default());
        let mut m = AnnotatedMap::new(h.width, h.height, 12, 9);
        m.update(pose, &obs).unwrap();
        assert!(m.landmarks.contains(&Landmark {
            pos: Pos::new(3, 2),
            category: 2
        }));
        assert_eq!(m.landmarks.len(), 1);
    }

    #[test]
    fn explored_never_shrinks_and_trajectory_tracks_moves() {
        let h = Arc::new(generate_house(9, &GenParams::default()).unwrap());
        let (mut s, obs) = EpisodeState::reset(h.clone(), EnvConfig::default());
        let mut m = AnnotatedMap::new(h.width, h.height, 12, h.target_category);
        m.update(s.pose(), &obs).unwrap();
        let mut moves = 0;
        for a in [
            NavAction::RotateLeft,
            NavAction::MoveAhead,
            NavAction::RotateRight,
            NavAction::MoveAhead,
        ] {
            let before = m.explored.clone();
            let prev = s.pose();
            let out = s.step(a).unwrap();
            m.update(s.pose(), &out.observation).unwrap();
            if s.pose() != prev {
                moves += 1;
            }
            for (b, a) in before.iter().zip(&m.explored) {
                assert!(!b || *a);
            }
        }
        assert_eq!(m.trajectory.len(), moves + 1);
    }

    #[test]
    fn geometry_mismatch_is_rejected() {
        let h = generate_house(7, &GenParams::default()).unwrap();
        let mut obs = observe(&h, h.start_pose, Default::default());
        obs.ego_view.pop();
        let mut m = AnnotatedMap::new(h.width, h.height, 12, h.target_category);
        assert!(matches!(
            m.update(h.start_pose, &obs),
            Err(MapError::GeometryMismatch(_))
        ));
    }
}
