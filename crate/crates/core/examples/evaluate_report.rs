//! Full evaluation of one checkpoint: strategy table, entropy histogram,
//! threshold sweep, pass@k, difficulty strata and robustness, written as CSV,
//! JSONL and SVG.
//!
//! cargo run --example evaluate_report -- rl_out/stageII_best.ckpt [tasks] [out_dir]

use std::path::PathBuf;
use std::sync::Arc;

use entnav::eval::{
    difficulty_stratify, emit_report, entropy_histogram_of, evaluate, pass_at_k, q_threshold_sweep, robustness_curve,
    success_counts, Report, StrategySummary,
};
use entnav::gate::{EpisodeOptions, GateConfig, Strategy};
use entnav::navsim::{generate_house, GenParams};
use entnav::policy::load_checkpoint;

fn main() {
    let mut args = std::env::args().skip(1);
    let ckpt = args.next().expect("usage: evaluate_report <ckpt> [tasks] [out_dir]");
    let tasks: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(50);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "report_out".into()));
    let (net, _) = load_checkpoint(ckpt.as_ref()).expect("checkpoint");

    let houses: Vec<_> = (0..tasks)
        .map(|s| Arc::new(generate_house(2_000_000_000 + s, &GenParams::default()).expect("house")))
        .collect();
    let opts = EpisodeOptions {
        temperature: 1.0,
        ..EpisodeOptions::default()
    };
    let hybrid = Strategy::Hybrid { tau: 0.6, k: 5 };
    let mut report = Report::default();
    for s in [
        Strategy::NoThink,
        Strategy::DenseThink,
        Strategy::EveryK { k: 5 },
        hybrid,
    ] {
        let recs = evaluate(&net, &houses, &GateConfig::new(s), &opts, 1).expect("eval");
        let summary = StrategySummary::from_records(s.name(), &recs).expect("summary");
        println!("{summary:?}");
        if s == Strategy::NoThink {
            let ents: Vec<f64> = recs.iter().flat_map(|r| r.entropies.iter().copied()).collect();
            report.histogram = Some(entropy_histogram_of(&ents, &[0.2, 0.4, 0.6, 0.8]));
        }
        if s == hybrid {
            report.strata = Some(difficulty_stratify(&recs, 10, 25));
        }
        report.strategies.push(summary);
        report.records.extend(recs);
    }
    let taus = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
    let sweep = q_threshold_sweep(&net, &houses, &taus, houses.len(), 0.99, 5, &opts, 2).expect("sweep");
    println!(
        "mean Q over tau {taus:?}: {:?} (argmax {:?})",
        sweep.mean_q,
        sweep.argmax_tau()
    );
    report.sweep = Some(sweep);

    let sampled = EpisodeOptions {
        temperature: 0.2,
        ..opts.clone()
    };
    let mut recs = Vec::new();
    for i in 0..8 {
        recs.extend(
            evaluate(
                &net,
                &houses[..houses.len().min(20)],
                &GateConfig::new(hybrid),
                &sampled,
                100 + i,
            )
            .expect("eval"),
        );
    }
    report.pass_at_k = pass_at_k(&success_counts(&recs), &[1, 2, 4, 8]).expect("pass@k");
    println!("pass@k {:?}", report.pass_at_k);

    report.robustness = robustness_curve(
        &net,
        &houses,
        &[(0.0, 0.0), (0.3, 0.1), (1.0, 1.0)],
        &GateConfig::new(hybrid),
        &opts,
        3,
    )
    .expect("robustness");
    for f in emit_report(&report, &out).expect("report") {
        println!("wrote {}", f.display());
    }
}
