//! Egocentric observations with line-of-sight occlusion.
//!
//! The view is a `depth x width` rectangle in front of the agent. Row `r`
//! holds cells `r + 1` steps ahead; column `c` holds lateral offset
//! `c - width / 2` (negative is left). A cell is visible when no wall lies
//! strictly between it and the agent along the Bresenham line joining the two
//! cell centres; cells behind the first wall along a ray are `Unknown`.

use serde::{Deserialize, Serialize};

use super::house::{GridHouse, Tile};
use super::AgentPose;
use super::Pos;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewGeometry {
    pub depth: usize,
    pub width: usize,
}

impl Default for ViewGeometry {
    fn default() -> Self {
        Self { depth: 7, width: 5 }
    }
}

impl ViewGeometry {
    pub fn cells(&self) -> usize {
        self.depth * self.width
    }

    /// `(forward, right)` offsets of view slot `(row, col)`.
    pub fn offsets(&self, row: usize, col: usize) -> (i32, i32) {
        (row as i32 + 1, col as i32 - (self.width / 2) as i32)
    }

    /// Inverse of [`ViewGeometry::offsets`].
    pub fn slot(&self, forward: i32, right: i32) -> Option<(usize, usize)> {
        let row = forward - 1;
        let col = right + (self.width / 2) as i32;
        if row < 0 || col < 0 || row as usize >= self.depth || col as usize >= self.width {
            None
        } else {
            Some((row as usize, col as usize))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ViewCell {
    Unknown,
    Wall,
    Free,
    Object { category: u8, landmark: bool },
}

impl ViewCell {
    pub fn is_known(&self) -> bool {
        !matches!(self, ViewCell::Unknown)
    }
}

/// One egocentric frame plus the instruction (target category).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub geometry: ViewGeometry,
    /// Row-major, `geometry.depth` rows of `geometry.width` cells.
    pub ego_view: Vec<ViewCell>,
    pub target_category: u8,
}

impl Observation {
    pub fn cell(&self, row: usize, col: usize) -> ViewCell {
        self.ego_view[row * self.geometry.width + col]
    }

    pub fn target_visible(&self) -> bool {
        self.ego_view
            .iter()
            .any(|c| matches!(c, ViewCell::Object { category, .. } if *category == self.target_category))
    }

    pub fn known_cells(&self) -> usize {
        self.ego_view.iter().filter(|c| c.is_known()).count()
    }
}

/// Cells strictly between the origin and `(forward, right)` on the Bresenham line.
pub fn ray_interior(forward: i32, right: i32) -> Vec<(i32, i32)> {
    let (mut x, mut y) = (0i32, 0i32);
    let dx = forward.abs();
    let dy = -right.abs();
    let sx = forward.signum();
    let sy = right.signum();
    let mut err = dx + dy;
    let mut out = Vec::new();
    loop {
        if x == forward && y == right {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
        if !(x == forward && y == right) {
            out.push((x, y));
        }
    }
    out
}

/// Ray-casts the egocentric view of `pose` in `house`.
pub fn observe(house: &GridHouse, pose: AgentPose, geometry: ViewGeometry) -> Observation {
    let mut ego_view = Vec::with_capacity(geometry.cells());
    for row in 0..geometry.depth {
        for col in 0..geometry.width {
            let (f, r) = geometry.offsets(row, col);
            ego_view.push(view_cell(house, pose, f, r));
        }
    }
    Observation {
        geometry,
        ego_view,
        target_category: house.target_category,
    }
}

fn view_cell(house: &GridHouse, pose: AgentPose, forward: i32, right: i32) -> ViewCell {
    let world: Pos = pose.ego_to_world(forward, right);
    if !house.in_bounds(world) {
        return ViewCell::Unknown;
    }
    let occluded = ray_interior(forward, right)
        .into_iter()
        .any(|(f, r)| house.tile(pose.ego_to_world(f, r)) == Tile::Wall);
    if occluded {
        return ViewCell::Unknown;
    }
    match house.tile(world) {
        Tile::Wall => ViewCell::Wall,
        Tile::Free => match house.object_at(world) {
            Some(o) => ViewCell::Object {
                category: o.category,
                landmark: o.landmark,
            },
            None => ViewCell::Free,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::navsim::house::house_from_ascii;
    use crate::navsim::Heading;

    #[test]
    fn ray_interior_straight_and_diagonal() {
        assert_eq!(ray_interior(1, 0), vec![]);
        assert_eq!(ray_interior(3, 0), vec![(1, 0), (2, 0)]);
        assert_eq!(ray_interior(2, 2), vec![(1, 1)]);
        assert_eq!(ray_interior(2, -2), vec![(1, -1)]);
    }

    #[test]
    fn wall_directly_ahead_blocks_the_column() {
        // 3x3 interior pocket: agent at the centre facing north, wall above.
        let h = house_from_ascii(
            &["#####", "#...#", "#...#", "#####"],
            9,
            AgentPose::new(2, 2, Heading::N),
            0,
        );
        let g = ViewGeometry::default();
        let obs = observe(&h, AgentPose::new(2, 2, Heading::N), g);
        // row 0 centre: the cell (2,1) is free; row 1 centre is the wall (2,0)
        assert_eq!(obs.cell(0, 2), ViewCell::Free);
        assert_eq!(obs.cell(1, 2), ViewCell::Wall);
        // beyond the wall everything in that column is unknown
        for row in 2..g.depth {
            assert_eq!(obs.cell(row, 2), ViewCell::Unknown);
        }
    }

    #[test]
    fn view_rotates_with_heading() {
        let rows = ["#######", "#.....#", "#..3..#", "#.....#", "#######"];
        let h = house_from_ascii(&rows, 3, AgentPose::new(3, 3, Heading::N), 0);
        let g = ViewGeometry::default();
        let north = observe(&h, AgentPose::new(3, 3, Heading::N), g);
        assert_eq!(
            north.cell(0, 2),
            ViewCell::Object {
                category: 3,
                landmark: false
            }
        );
        let east = observe(&h, AgentPose::new(2, 2, Heading::E), g);
        assert_eq!(
            east.cell(0, 2),
            ViewCell::Object {
                category: 3,
                landmark: false
            }
        );
        let west = observe(&h, AgentPose::new(4, 2, Heading::W), g);
        assert!(west.target_visible());
        let south = observe(&h, AgentPose::new(3, 3, Heading::S), g);
        assert!(!south.target_visible());
    }
}
