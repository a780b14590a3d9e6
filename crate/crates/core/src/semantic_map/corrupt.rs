//! Synthetic perception noise for the robustness study.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AnnotatedMap, Occupancy};

/// Returns a corrupted copy of `map`.
///
/// Each landmark is dropped with probability `p_drop`; a surviving landmark is
/// relabelled to a uniformly drawn different category with probability
/// `p_mislabel`. Explored wall/free cells flip with probability `p_mislabel / 2`.
/// Probabilities are clamped to `[0, 1]`.
pub fn corrupt_map(map: &AnnotatedMap, p_drop: f64, p_mislabel: f64, seed: u64) -> AnnotatedMap {
    let p_drop = p_drop.clamp(0.0, 1.0);
    let p_mislabel = p_mislabel.clamp(0.0, 1.0);
    let mut out = map.clone();
    if p_drop == 0.0 && p_mislabel == 0.0 {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cats = map.num_categories.max(1);
    out.landmarks.clear();
    for l in &map.landmarks {
        if rng.random_bool(p_drop) {
            continue;
        }
        let mut l = *l;
        if rng.random_bool(p_mislabel) && cats > 1 {
            let shift = rng.random_range(1..cats);
            l.category = ((l.category as usize + shift) % cats) as u8;
        }
        out.landmarks.push(l);
    }
    let flip = p_mislabel / 2.0;
    for i in 0..out.occupancy.len() {
        if !out.explored[i] {
            continue;
        }
        let hit = rng.random_bool(flip);
        if hit {
            out.occupancy[i] = match out.occupancy[i] {
                Occupancy::Wall => Occupancy::Free,
                Occupancy::Free => Occupancy::Wall,
                Occupancy::Unknown => Occupancy::Unknown,
            };
        }
    }
    out
}
