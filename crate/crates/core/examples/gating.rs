//! Compare the four decoding strategies on the same tasks: success, tokens
//! per step and how often the gate fires.
//!
//! cargo run --example gating -- [checkpoint]
//!
//! Without a checkpoint an untrained net is used, which makes the entropy gate
//! fire almost everywhere the window allows.

use std::sync::Arc;

use entnav::eval::{evaluate, StrategySummary};
use entnav::gate::{EpisodeOptions, GateConfig, Strategy};
use entnav::navsim::{generate_house, EnvConfig, GenParams};
use entnav::policy::{load_checkpoint, PolicyConfig, PolicyNet};

fn main() {
    let net = match std::env::args().nth(1) {
        Some(p) => load_checkpoint(p.as_ref()).expect("checkpoint").0,
        None => PolicyNet::new(PolicyConfig::default()),
    };
    let houses: Vec<_> = (0..40u64)
        .map(|s| Arc::new(generate_house(2_000_000_000 + s, &GenParams::default()).expect("house")))
        .collect();
    let opts = EpisodeOptions {
        env: EnvConfig {
            max_steps: 150,
            ..EnvConfig::evaluation()
        },
        temperature: 1.0,
        ..EpisodeOptions::default()
    };
    println!(
        "{:<8} {:>6} {:>6} {:>11} {:>9}",
        "strategy", "SR", "SEL", "tokens/step", "thinking"
    );
    for s in [
        Strategy::NoThink,
        Strategy::DenseThink,
        Strategy::EveryK { k: 5 },
        Strategy::Hybrid { tau: 0.6, k: 5 },
        Strategy::Hybrid { tau: 0.9, k: 5 },
    ] {
        let recs = evaluate(&net, &houses, &GateConfig::new(s), &opts, 1).expect("eval");
        let r = StrategySummary::from_records(s.name(), &recs).expect("summary");
        println!(
            "{:<8} {:>6.3} {:>6.3} {:>11.2} {:>9.3}  {s:?}",
            r.strategy, r.success_rate, r.sel, r.tokens_per_step, r.thinking_ratio
        );
    }
}
