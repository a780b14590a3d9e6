//! Fixed-length agent-frame featurization of the map.
//!
//! Layout (`pooled` = `grid * grid` per channel):
//!
//! | block | size | content |
//! |---|---|---|
//! | explored | pooled | fraction of explored cells per block |
//! | free | pooled | fraction of known-free cells per block |
//! | visited | pooled | fraction of trajectory cells per block |
//! | landmarks | `5 * landmark_slots` | per nearest landmark: present, forward, right, `1/(1+d)`, is-target |
//! | target | 4 | target seen, forward, right, `1/(1+d)` of the nearest target annotation |
//!
//! The pooled window spans offsets `-radius..=radius` around the agent in its
//! own frame (row 0 is farthest ahead). Each axis is cut into `grid` bins of
//! equal width; the agent's own row/column is shared half-and-half by the two
//! middle bins, which keeps the pooling exactly equivariant to 90° turns.

use serde::{Deserialize, Serialize};

use super::{AnnotatedMap, Occupancy};
use crate::navsim::{AgentPose, Pos};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapFeatureConfig {
    /// Pooled bins per axis (even).
    pub grid: usize,
    /// Window half-width; `2 * radius` must be a multiple of `grid`.
    pub radius: i32,
    pub landmark_slots: usize,
}

impl Default for MapFeatureConfig {
    fn default() -> Self {
        Self {
            grid: 8,
            radius: 8,
            landmark_slots: 4,
        }
    }
}

impl MapFeatureConfig {
    pub fn pooled(&self) -> usize {
        self.grid * self.grid
    }

    pub fn len(&self) -> usize {
        3 * self.pooled() + 5 * self.landmark_slots + 4
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn target_block(&self) -> usize {
        3 * self.pooled() + 5 * self.landmark_slots
    }

    /// Bins touched by a signed offset, with weights.
    fn bins(&self, o: i32) -> [(usize, f64); 2] {
        let half = (self.grid / 2) as i32;
        let bw = (2 * self.radius) / self.grid as i32;
        if o == 0 {
            [((half - 1) as usize, 0.5), (half as usize, 0.5)]
        } else if o < 0 {
            (((o + self.radius) / bw) as usize, 1.0).pair()
        } else {
            ((half + (o - 1) / bw) as usize, 1.0).pair()
        }
    }
}

trait Pair {
    fn pair(self) -> [(usize, f64); 2];
}

impl Pair for (usize, f64) {
    fn pair(self) -> [(usize, f64); 2] {
        [self, (self.0, 0.0)]
    }
}

fn direction(pose: AgentPose, p: Pos) -> (f64, f64, f64) {
    let (f, r) = pose.world_to_ego(p);
    let d = f64::from(f * f + r * r).sqrt();
    if d == 0.0 {
        (0.0, 0.0, 0.0)
    } else {
        (f64::from(f) / d, f64::from(r) / d, d)
    }
}

/// Pools `map` around its current pose. An empty map yields all zeros.
pub fn map_features(map: &AnnotatedMap, cfg: &MapFeatureConfig) -> Vec<f64> {
    let mut out = vec![0.0; cfg.len()];
    let Some(pose) = map.current_pose else {
        return out;
    };
    let pooled = cfg.pooled();
    let g = cfg.grid;
    let mut visited = vec![false; map.width * map.height];
    for p in &map.trajectory {
        visited[map.index(p.pos())] = true;
    }
    let mut sums = vec![0.0; 3 * pooled];
    let mut weights = vec![0.0; pooled];
    for fwd in -cfg.radius..=cfg.radius {
        // row 0 is farthest ahead
        let rows = cfg.bins(-fwd);
        for right in -cfg.radius..=cfg.radius {
            let cols = cfg.bins(right);
            let world = pose.ego_to_world(fwd, right);
            let (e, fr, v) = if map.in_bounds(world) {
                let i = map.index(world);
                (
                    map.explored[i] as u8 as f64,
                    (map.occupancy[i] == Occupancy::Free && map.explored[i]) as u8 as f64,
                    visited[i] as u8 as f64,
                )
            } else {
                (0.0, 0.0, 0.0)
            };
            for &(r, wr) in &rows {
                for &(c, wc) in &cols {
                    let w = wr * wc;
                    if w == 0.0 {
                        continue;
                    }
                    let b = r * g + c;
                    weights[b] += w;
                    sums[b] += w * e;
                    sums[pooled + b] += w * fr;
                    sums[2 * pooled + b] += w * v;
                }
            }
        }
    }
    for ch in 0..3 {
        for b in 0..pooled {
            out[ch * pooled + b] = sums[ch * pooled + b] / weights[b];
        }
    }

    let mut lms: Vec<(f64, i32, i32, usize)> = map
        .landmarks
        .iter()
        .enumerate()
        .map(|(i, l)| (direction(pose, l.pos).2, l.pos.y, l.pos.x, i))
        .collect();
    lms.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let base = 3 * pooled;
    for (slot, &(_, _, _, i)) in lms.iter().take(cfg.landmark_slots).enumerate() {
        let l = map.landmarks[i];
        let (f, r, d) = direction(pose, l.pos);
        let o = base + 5 * slot;
        out[o] = 1.0;
        out[o + 1] = f;
        out[o + 2] = r;
        out[o + 3] = 1.0 / (1.0 + d);
        out[o + 4] = (l.category == map.target_category) as u8 as f64;
    }
    let nearest_target = lms
        .iter()
        .map(|&(_, _, _, i)| map.landmarks[i])
        .find(|l| l.category == map.target_category);
    if let Some(t) = nearest_target {
        let (f, r, d) = direction(pose, t.pos);
        let o = cfg.target_block();
        out[o] = 1.0;
        out[o + 1] = f;
        out[o + 2] = r;
        out[o + 3] = 1.0 / (1.0 + d);
    }
    out
}
