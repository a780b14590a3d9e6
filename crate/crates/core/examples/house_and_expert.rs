//! Generate a house, print it, and walk the shortest-path expert through it.
//!
//! cargo run --example house_and_expert -- [seed]

use std::sync::Arc;

use entnav::navsim::{
    expert_action, generate_house, shortest_episode_length, EnvConfig, EpisodeState, GenParams, Pos, Tile,
};

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let house = Arc::new(generate_house(seed, &GenParams::default()).expect("house"));
    let start = house.start_pose;
    for y in 0..house.height as i32 {
        let row: String = (0..house.width as i32)
            .map(|x| {
                let p = Pos::new(x, y);
                if (x, y) == (start.x, start.y) {
                    '@'
                } else if house.tile(p) == Tile::Wall {
                    '#'
                } else {
                    match house.object_at(p) {
                        Some(o) if o.category == house.target_category => 'T',
                        Some(o) if o.landmark => 'L',
                        Some(_) => 'o',
                        None => '.',
                    }
                }
            })
            .collect();
        println!("{row}");
    }
    let env = EnvConfig::evaluation();
    println!(
        "target category {}, {} target cells, shortest episode {:?}",
        house.target_category,
        house.target_cells().len(),
        shortest_episode_length(&house, &env)
    );

    let (mut state, _) = EpisodeState::reset(house.clone(), env);
    let mut total = 0.0;
    while !state.done() {
        let a = expert_action(&state).expect("expert");
        let out = state.step(a).expect("step");
        total += out.reward;
        println!(
            "t={:>3} {:?} d {} -> {} reward {:+.2}",
            state.clock(),
            a,
            out.geodesic_before,
            out.geodesic_to_target,
            out.reward
        );
    }
    println!(
        "success {} in {} steps, return {total:.2}",
        state.success(),
        state.clock()
    );
}
