//! Procedural house generation.
//!
//! Houses are built by recursive division: the walled interior is split by
//! straight walls, each pierced by a single door, until the requested number
//! of rooms exists. Objects are then scattered on free cells and a target
//! category is drawn among the non-landmark categories present.

use std::collections::VecDeque;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AgentPose, Heading, NavError, Pos};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tile {
    Wall,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub pos: Pos,
    pub category: u8,
    pub landmark: bool,
}

/// Knobs for [`generate_house`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenParams {
    pub width: usize,
    pub height: usize,
    pub rooms_min: usize,
    pub rooms_max: usize,
    /// Objects per free cell.
    pub object_density: f64,
    pub num_categories: usize,
    /// Fraction of categories (the lowest ids) that are furniture-like landmarks.
    pub landmark_fraction: f64,
    /// Start must be strictly farther than this many steps from every target.
    pub min_start_distance: u32,
    pub max_retries: u32,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            width: 16,
            height: 16,
            rooms_min: 3,
            rooms_max: 6,
            object_density: 0.08,
            num_categories: 12,
            landmark_fraction: 0.5,
            min_start_distance: 4,
            max_retries: 64,
        }
    }
}

impl GenParams {
    pub fn landmark_categories(&self) -> usize {
        ((self.num_categories as f64) * self.landmark_fraction).round() as usize
    }

    pub fn validate(&self) -> Result<(), NavError> {
        let bad = |m: &str| Err(NavError::InvalidParams(m.to_string()));
        if self.width < 5 || self.height < 5 {
            return bad("grid must be at least 5x5");
        }
        if self.width > 256 || self.height > 256 {
            return bad("grid must be at most 256x256");
        }
        if self.rooms_min == 0 || self.rooms_min > self.rooms_max {
            return bad("room count range must satisfy 1 <= rooms_min <= rooms_max");
        }
        if !(0.0..=1.0).contains(&self.object_density) {
            return bad("object_density must lie in [0, 1]");
        }
        if self.num_categories == 0 || self.num_categories > 255 {
            return bad("num_categories must lie in 1..=255");
        }
        if !(0.0..=1.0).contains(&self.landmark_fraction) {
            return bad("landmark_fraction must lie in [0, 1]");
        }
        Ok(())
    }
}

/// An immutable generated house.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "HouseRecord", try_from = "HouseRecord")]
pub struct GridHouse {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<Tile>,
    pub objects: Vec<ObjectInstance>,
    pub target_category: u8,
    pub start_pose: AgentPose,
    pub seed: u64,
    pub params: GenParams,
}

impl GridHouse {
    pub fn in_bounds(&self, p: Pos) -> bool {
        p.x >= 0 && p.y >= 0 && (p.x as usize) < self.width && (p.y as usize) < self.height
    }

    pub fn index(&self, p: Pos) -> usize {
        p.y as usize * self.width + p.x as usize
    }

    pub fn pos_of(&self, idx: usize) -> Pos {
        Pos::new((idx % self.width) as i32, (idx / self.width) as i32)
    }

    pub fn tile(&self, p: Pos) -> Tile {
        if self.in_bounds(p) {
            self.cells[self.index(p)]
        } else {
            Tile::Wall
        }
    }

    pub fn is_free(&self, p: Pos) -> bool {
        self.tile(p) == Tile::Free
    }

    pub fn object_at(&self, p: Pos) -> Option<&ObjectInstance> {
        self.objects.iter().find(|o| o.pos == p)
    }

    pub fn target_cells(&self) -> Vec<Pos> {
        self.objects
            .iter()
            .filter(|o| o.category == self.target_category)
            .map(|o| o.pos)
            .collect()
    }

    pub fn free_count(&self) -> usize {
        self.cells.iter().filter(|&&t| t == Tile::Free).count()
    }

    /// Serializes to a single JSON line.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("house serialization is infallible")
    }

    pub fn from_json_line(line: &str) -> Result<Self, NavError> {
        serde_json::from_str(line).map_err(|e| NavError::Malformed(e.to_string()))
    }
}

/// Serialized layout: grid rows as strings, `#` for walls and `.` for free cells.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct HouseRecord {
    seed: u64,
    params: GenParams,
    grid: Vec<String>,
    objects: Vec<ObjectInstance>,
    target_category: u8,
    start: AgentPose,
}

impl From<GridHouse> for HouseRecord {
    fn from(h: GridHouse) -> Self {
        let grid = (0..h.height)
            .map(|y| {
                (0..h.width)
                    .map(|x| match h.cells[y * h.width + x] {
                        Tile::Wall => '#',
                        Tile::Free => '.',
                    })
                    .collect()
            })
            .collect();
        HouseRecord {
            seed: h.seed,
            params: h.params,
            grid,
            objects: h.objects,
            target_category: h.target_category,
            start: h.start_pose,
        }
    }
}

impl TryFrom<HouseRecord> for GridHouse {
    type Error = String;

    fn try_from(r: HouseRecord) -> Result<Self, String> {
        let height = r.grid.len();
        let width = r.grid.first().map(|row| row.len()).unwrap_or(0);
        let mut cells = Vec::with_capacity(width * height);
        for row in &r.grid {
            if row.len() != width {
                return Err("ragged grid rows".into());
            }
            for ch in row.chars() {
                cells.push(match ch {
                    '#' => Tile::Wall,
                    '.' => Tile::Free,
                    other => return Err(format!("unknown grid character {other:?}")),
                });
            }
        }
        Ok(GridHouse {
            width,
            height,
            cells,
            objects: r.objects,
            target_category: r.target_category,
            start_pose: r.start,
            seed: r.seed,
            params: r.params,
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct Rect {
    x0: i32,
    y0: i32,
    x1: i32, // exclusive
    y1: i32, // exclusive
}

impl Rect {
    fn w(&self) -> i32 {
        self.x1 - self.x0
    }
    fn h(&self) -> i32 {
        self.y1 - self.y0
    }
}

/// Generates a house deterministically from `(seed, params)`.
pub fn generate_house(seed: u64, params: &GenParams) -> Result<GridHouse, NavError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last_reason = String::new();
    for _ in 0..params.max_retries.max(1) {
        match try_generate(&mut rng, seed, params) {
            Ok(h) => return Ok(h),
            Err(reason) => last_reason = reason,
        }
    }
    Err(NavError::GenerationFailed {
        seed,
        attempts: params.max_retries.max(1),
        reason: last_reason,
    })
}

fn try_generate(rng: &mut ChaCha8Rng, seed: u64, params: &GenParams) -> Result<GridHouse, String> {
    let (w, h) = (params.width as i32, params.height as i32);
    let mut cells = vec![Tile::Free; params.width * params.height];
    let idx = |x: i32, y: i32| (y * w + x) as usize;
    for x in 0..w {
        cells[idx(x, 0)] = Tile::Wall;
        cells[idx(x, h - 1)] = Tile::Wall;
    }
    for y in 0..h {
        cells[idx(0, y)] = Tile::Wall;
        cells[idx(w - 1, y)] = Tile::Wall;
    }

    let target_rooms = rng.random_range(params.rooms_min..=params.rooms_max);
    let mut rooms = vec![Rect {
        x0: 1,
        y0: 1,
        x1: w - 1,
        y1: h - 1,
    }];
    let mut doors: Vec<Pos> = Vec::new();
    while rooms.len() < target_rooms {
        // Split the largest room that admits a wall leaving both sides >= 2 wide.
        let mut order: Vec<usize> = (0..rooms.len()).collect();
        order.sort_by_key(|&i| (-(rooms[i].w() * rooms[i].h()), i));
        let mut split_done = false;
        for &ri in &order {
            let r = rooms[ri];
            let vertical_ok = r.w() >= 5;
            let horizontal_ok = r.h() >= 5;
            let vertical = match (vertical_ok, horizontal_ok) {
                (false, false) => continue,
                (true, false) => true,
                (false, true) => false,
                (true, true) => {
                    if r.w() != r.h() {
                        r.w() > r.h()
                    } else {
                        rng.random_bool(0.5)
                    }
                }
            };
            // Wall lines must not abut an existing door on the room boundary.
            let candidates: Vec<i32> = if vertical {
                (r.x0 + 2..r.x1 - 2)
                    .filter(|&x| !doors.contains(&Pos::new(x, r.y0 - 1)) && !doors.contains(&Pos::new(x, r.y1)))
                    .collect()
            } else {
                (r.y0 + 2..r.y1 - 2)
                    .filter(|&y| !doors.contains(&Pos::new(r.x0 - 1, y)) && !doors.contains(&Pos::new(r.x1, y)))
                    .collect()
            };
            let Some(&line) = candidates.choose(rng) else {
                continue;
            };
            let (a, b, door) = if vertical {
                let door_y = rng.random_range(r.y0..r.y1);
                for y in r.y0..r.y1 {
                    if y != door_y {
                        cells[idx(line, y)] = Tile::Wall;
                    }
                }
                (
                    Rect { x1: line, ..r },
                    Rect { x0: line + 1, ..r },
                    Pos::new(line, door_y),
                )
            } else {
                let door_x = rng.random_range(r.x0..r.x1);
                for x in r.x0..r.x1 {
                    if x != door_x {
                        cells[idx(x, line)] = Tile::Wall;
                    }
                }
                (
                    Rect { y1: line, ..r },
                    Rect { y0: line + 1, ..r },
                    Pos::new(door_x, line),
                )
            };
            doors.push(door);
            rooms[ri] = a;
            rooms.push(b);
            split_done = true;
            break;
        }
        if !split_done {
            break;
        }
    }

    // Connectivity: every free cell in one 4-connected component.
    let free: Vec<usize> = (0..cells.len()).filter(|&i| cells[i] == Tile::Free).collect();
    if free.is_empty() {
        return Err("no free cells".into());
    }
    let reached = flood(&cells, params.width, params.height, free[0]);
    if reached != free.len() {
        return Err("free space is not connected".into());
    }

    // Objects on free non-door cells.
    let door_set: Vec<usize> = doors.iter().map(|d| idx(d.x, d.y)).collect();
    let mut slots: Vec<usize> = free.iter().copied().filter(|i| !door_set.contains(i)).collect();
    let n_objects = ((slots.len() as f64) * params.object_density).round() as usize;
    let n_landmark_cats = params.landmark_categories();
    let mut objects = Vec::with_capacity(n_objects);
    for _ in 0..n_objects.min(slots.len()) {
        let k = rng.random_range(0..slots.len());
        let cell = slots.swap_remove(k);
        let category = rng.random_range(0..params.num_categories) as u8;
        objects.push(ObjectInstance {
            pos: Pos::new((cell % params.width) as i32, (cell / params.width) as i32),
            category,
            landmark: (category as usize) < n_landmark_cats,
        });
    }
    objects.sort_by_key(|o| (o.pos.y, o.pos.x));

    let mut target_pool: Vec<u8> = objects.iter().filter(|o| !o.landmark).map(|o| o.category).collect();
    target_pool.sort_unstable();
    target_pool.dedup();
    let Some(&target_category) = target_pool.choose(rng) else {
        return Err("no candidate target category present".into());
    };

    let mut house = GridHouse {
        width: params.width,
        height: params.height,
        cells,
        objects,
        target_category,
        start_pose: AgentPose::new(0, 0, Heading::N),
        seed,
        params: params.clone(),
    };

    let field = super::oracle::distance_field(&house, &house.target_cells());
    let starts: Vec<usize> = free
        .iter()
        .copied()
        .filter(|&i| matches!(field[i], Some(d) if d > params.min_start_distance))
        .collect();
    let Some(&start) = starts.choose(rng) else {
        return Err("no start cell far enough from the target".into());
    };
    let heading = Heading::from_index(rng.random_range(0..4));
    let p = house.pos_of(start);
    house.start_pose = AgentPose::new(p.x, p.y, heading);
    Ok(house)
}

fn flood(cells: &[Tile], w: usize, h: usize, from: usize) -> usize {
    let mut seen = vec![false; cells.len()];
    let mut queue = VecDeque::from([from]);
    seen[from] = true;
    let mut count = 0;
    while let Some(i) = queue.pop_front() {
        count += 1;
        let (x, y) = (i % w, i / w);
        let mut push = |j: usize| {
            if !seen[j] && cells[j] == Tile::Free {
                seen[j] = true;
                queue.push_back(j);
            }
        };
        if x > 0 {
            push(i - 1);
        }
        if x + 1 < w {
            push(i + 1);
        }
        if y > 0 {
            push(i - w);
        }
        if y + 1 < h {
            push(i + w);
        }
    }
    count
}

/// Builds a house from ASCII rows, for fixtures.
///
/// `#` wall, `.` free, `0`-`9`/`a`-`z` an object of that category (base 36)
/// on a free cell. Categories below `landmark_below` are landmarks.
pub fn house_from_ascii(rows: &[&str], target_category: u8, start: AgentPose, landmark_below: u8) -> GridHouse {
    let height = rows.len();
    let width = rows[0].len();
    let mut cells = Vec::with_capacity(width * height);
    let mut objects = Vec::new();
    for (y, row) in rows.iter().enumerate() {
        assert_eq!(row.len(), width, "ragged fixture rows");
        for (x, ch) in row.chars().enumerate() {
            match ch {
                '#' => cells.push(Tile::Wall),
                '.' => cells.push(Tile::Free),
                c => {
                    let category = c.to_digit(36).expect("fixture object digit") as u8;
                    cells.push(Tile::Free);
                    objects.push(ObjectInstance {
                        pos: Pos::new(x as i32, y as i32),
                        category,
                        landmark: category < landmark_below,
                    });
                }
            }
        }
    }
    GridHouse {
        width,
        height,
        cells,
        objects,
        target_category,
        start_pose: start,
        seed: 0,
        params: GenParams {
            width,
            height,
            ..GenParams::default()
        },
    }
}
