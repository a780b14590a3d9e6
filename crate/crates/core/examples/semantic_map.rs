//! Build the annotated semantic map along an expert episode and render it
//! (optionally corrupted) as PPM images.
//!
//! cargo run --example semantic_map -- [seed] [out_dir]

use std::path::PathBuf;
use std::sync::Arc;

use entnav::eval::entropy_heatmap;
use entnav::gate::{run_episode, EpisodeOptions, ExpertActor, GateConfig, Strategy};
use entnav::navsim::{generate_house, GenParams};
use entnav::semantic_map::{corrupt_map, map_features, render_map, MapFeatureConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(3);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "map_out".into()));
    std::fs::create_dir_all(&out).expect("out dir");

    let house = Arc::new(generate_house(seed, &GenParams::default()).expect("house"));
    let ep = run_episode(
        &ExpertActor,
        house,
        &GateConfig::new(Strategy::NoThink),
        &EpisodeOptions::default(),
        seed,
    )
    .expect("episode");
    let map = &ep.map;
    println!(
        "{} steps, {} cells explored, {} landmarks ({} of the target), nearest frontier {:?}",
        ep.record.steps,
        map.explored_count(),
        map.landmarks.len(),
        map.target_landmarks().count(),
        map.nearest_frontier()
    );
    let feats = map_features(map, &MapFeatureConfig::default());
    println!(
        "feature vector: {} values, {} non-zero",
        feats.len(),
        feats.iter().filter(|&&x| x != 0.0).count()
    );

    let write = |name: &str, bytes: Vec<u8>| {
        std::fs::write(out.join(name), bytes).expect("write");
        println!("wrote {}", out.join(name).display());
    };
    write("map.ppm", render_map(map, None).expect("render").to_ppm());
    write(
        "map_corrupted.ppm",
        render_map(&corrupt_map(map, 0.3, 0.1, seed), None)
            .expect("render")
            .to_ppm(),
    );
    write(
        "heatmap.ppm",
        entropy_heatmap(&ep.record, map).expect("heatmap").to_ppm(),
    );
}
