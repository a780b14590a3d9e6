//! Stage I (reflexive rollouts) then stage II (hybrid rollouts, KL to the
//! stage-I pick) from an H-SFT checkpoint.
//!
//! cargo run --example two_stage_rl -- sft_out/hsft.ckpt [updates] [out_dir]

use std::path::PathBuf;
use std::sync::Arc;

use entnav::navsim::{generate_house, GenParams};
use entnav::policy::load_checkpoint;
use entnav::trainer::{train_two_stage, PpoConfig, TwoStageConfig};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let ckpt = args
        .next()
        .expect("usage: two_stage_rl <hsft.ckpt> [updates] [out_dir]");
    let updates = args.next().and_then(|s| s.parse().ok()).unwrap_or(4);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "rl_out".into()));

    let (init, _) = load_checkpoint(ckpt.as_ref()).expect("checkpoint");
    let houses: Vec<_> = (0..100u64)
        .map(|s| Arc::new(generate_house(1_000_000_000 + s, &GenParams::default()).expect("house")))
        .collect();
    let cfg = TwoStageConfig {
        ppo: PpoConfig {
            updates_per_stage: updates,
            ..PpoConfig::default()
        },
        ..TwoStageConfig::default()
    };
    let res = train_two_stage(&init, &houses, &cfg, Some(&out)).expect("training");
    for l in res.logs() {
        println!(
            "stage {:<2} update {:>2}: rollout SR {:.3} reward {:7.3} KL {:.2e} tokens/step {:.2}",
            l.stage, l.update_idx, l.rollout_sr, l.mean_reward, l.mean_kl, l.tokens_per_step
        );
    }
    for (name, s) in [("I", &res.stage1), ("II", &res.stage2)] {
        println!(
            "stage {name}: initial SR {:.3}, best {:.3} at update {}",
            s.initial_sr, s.best_sr, s.best_update
        );
    }
    println!("checkpoints and train_log.jsonl in {}", out.display());
}
