//! Expert data, bootstrap SFT, entropy filter, reasoning annotation and hybrid
//! SFT at a reduced scale. Writes `hsft.ckpt` for the other examples.
//!
//! cargo run --example sft_pipeline -- [n_steps] [out_dir]

use std::path::PathBuf;

use entnav::policy::save_checkpoint;
use entnav::trainer::{collect_expert_dataset, run_sft_pipeline, CollectConfig, SftPipelineConfig};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let n_steps = args.next().and_then(|s| s.parse().ok()).unwrap_or(10_000);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "sft_out".into()));
    std::fs::create_dir_all(&out).expect("out dir");

    let houses: Vec<u64> = (0..20_000).collect();
    let mut ds = collect_expert_dataset(
        &houses,
        &CollectConfig {
            n_steps,
            ..CollectConfig::default()
        },
    )
    .expect("collect");
    println!(
        "{} reflexive samples from {} houses",
        ds.nrd.len(),
        ds.meta.house_seeds.len()
    );

    let res = run_sft_pipeline(&mut ds, &SftPipelineConfig::default()).expect("sft");
    println!("bootstrap loss per epoch {:?}", res.bootstrap_curve);
    println!("annotation {:?}", res.annotation);
    println!(
        "{} thinking samples kept; hybrid SFT loss per epoch {:?}",
        ds.rd.len(),
        res.hsft_curve
    );
    let path = out.join("hsft.ckpt");
    save_checkpoint(
        &res.hsft_net,
        serde_json::json!({ "stage": "hsft", "n_steps": n_steps }),
        &path,
    )
    .expect("save");
    println!("wrote {}", path.display());
}
