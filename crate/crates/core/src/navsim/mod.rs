//! Procedural gridworld for object-goal navigation.
//!
//! The world is a walled grid of rooms joined by doors, with objects scattered
//! on free cells. An agent with a heading observes an egocentric cone of cells
//! and must stop (`end`) close to an instance of the target category while that
//! instance is in view.
//!
//! - [`house`]: procedural generation and line-delimited JSON serialization.
//! - [`view`]: egocentric ray-cast observations.
//! - [`env`]: episode state, transition and reward.
//! - [`oracle`]: BFS distances, the shortest-episode oracle and the privileged expert.

pub mod env;
pub mod house;
pub mod oracle;
pub mod view;

pub use env::{EnvConfig, EpisodeState, RewardTerms, StepOutcome, StepRecord};
pub use house::{generate_house, GenParams, GridHouse, ObjectInstance, Tile};
pub use oracle::{expert_action, geodesic_distance, next_pose, shortest_episode_length, HouseOracle};
pub use view::{Observation, ViewCell, ViewGeometry};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised by the environment and its oracles.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NavError {
    #[error("house generation failed for seed {seed} after {attempts} attempts: {reason}")]
    GenerationFailed { seed: u64, attempts: u32, reason: String },
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
    #[error("episode already terminated at clock {clock}")]
    EpisodeDone { clock: u32 },
    #[error("target set is empty")]
    EmptyTargetSet,
    #[error("cell ({x}, {y}) is not a free cell")]
    NotFree { x: i32, y: i32 },
    #[error("no target instance is reachable from ({x}, {y})")]
    Unreachable { x: i32, y: i32 },
    #[error("malformed house record: {0}")]
    Malformed(String),
}

/// Grid cell coordinate. `x` grows east, `y` grows south.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pos {
    pub x: i32,
    pub y: i32,
}

impl Pos {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn offset(self, dx: i32, dy: i32) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }

    pub fn neighbors4(self) -> [Pos; 4] {
        [
            self.offset(0, -1),
            self.offset(1, 0),
            self.offset(0, 1),
            self.offset(-1, 0),
        ]
    }
}

/// Cardinal heading of the agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Heading {
    N,
    E,
    S,
    W,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::N, Heading::E, Heading::S, Heading::W];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i % 4]
    }

    /// Unit step along the heading.
    pub fn forward(self) -> (i32, i32) {
        match self {
            Heading::N => (0, -1),
            Heading::E => (1, 0),
            Heading::S => (0, 1),
            Heading::W => (-1, 0),
        }
    }

    /// Unit step to the agent's right.
    pub fn right(self) -> (i32, i32) {
        self.turn_right().forward()
    }

    pub fn turn_left(self) -> Self {
        Self::from_index(self.index() + 3)
    }

    pub fn turn_right(self) -> Self {
        Self::from_index(self.index() + 1)
    }
}

/// Position plus heading; the full agent state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgentPose {
    pub x: i32,
    pub y: i32,
    pub heading: Heading,
}

impl AgentPose {
    pub fn new(x: i32, y: i32, heading: Heading) -> Self {
        Self { x, y, heading }
    }

    pub fn pos(&self) -> Pos {
        Pos::new(self.x, self.y)
    }

    /// World cell at `forward` steps ahead and `right` steps to the right.
    pub fn ego_to_world(&self, forward: i32, right: i32) -> Pos {
        let (fx, fy) = self.heading.forward();
        let (rx, ry) = self.heading.right();
        Pos::new(self.x + forward * fx + right * rx, self.y + forward * fy + right * ry)
    }

    /// Inverse of [`AgentPose::ego_to_world`]: `(forward, right)` offsets of a world cell.
    pub fn world_to_ego(&self, p: Pos) -> (i32, i32) {
        let dx = p.x - self.x;
        let dy = p.y - self.y;
        let (fx, fy) = self.heading.forward();
        let (rx, ry) = self.heading.right();
        (dx * fx + dy * fy, dx * rx + dy * ry)
    }
}

/// The five navigation actions. The discriminant is the action token id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NavAction {
    MoveAhead = 0,
    MoveBack = 1,
    RotateLeft = 2,
    RotateRight = 3,
    End = 4,
}

impl NavAction {
    pub const COUNT: usize = 5;
    pub const ALL: [NavAction; 5] = [
        NavAction::MoveAhead,
        NavAction::MoveBack,
        NavAction::RotateLeft,
        NavAction::RotateRight,
        NavAction::End,
    ];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn from_id(id: usize) -> Option<Self> {
        Self::ALL.get(id).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            NavAction::MoveAhead => "move_ahead",
            NavAction::MoveBack => "move_back",
            NavAction::RotateLeft => "rotate_left",
            NavAction::RotateRight => "rotate_right",
            NavAction::End => "end",
        }
    }
}
