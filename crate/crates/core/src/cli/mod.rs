//! Command-line front end: run directories, stage hand-off via `--from`, and
//! machine-readable error records.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use config::{
    AnnotateSection, ConfigError, DataSection, EnvSection, EvalSection, GateSection, PolicySection, Resolved,
    RlSection, RunConfig, SftSection,
};

use crate::eval::{
    self, difficulty_stratify, emit_report, entropy_heatmap, entropy_histogram_of, evaluate, evaluate_episodes,
    q_threshold_sweep, robustness_curve, EpisodeRecord, EvalError, Report, StrategySummary,
};
use crate::gate::{EpisodeOptions, Strategy};
use crate::navsim::{generate_house, GridHouse, NavError};
use crate::policy::{load_checkpoint, save_checkpoint, PolicyError, PolicyNet};
use crate::seeds;
use crate::trainer::{
    collect_expert_dataset, load_dataset, run_sft_pipeline, save_dataset, train_stage, two_stage::write_log, Stage,
    TrainerError,
};

/// Evaluation houses are seeded from here up; data and rollout houses stay below.
pub const EVAL_HOUSE_BASE: u64 = 2_000_000_000;
const TRAIN_HOUSE_BASE: u64 = 1_000_000_000;

pub const CONFIG_FILE: &str = "config.txt";
pub const DATASET_STEM: &str = "nrd";
pub const HYBRID_STEM: &str = "hybrid";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("missing input {}: {why}", path.display())]
    MissingInput { path: PathBuf, why: String },
    #[error("run directory {} already exists", .0.display())]
    RunExists(PathBuf),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Trainer(#[from] TrainerError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Nav(#[from] NavError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::MissingInput { .. } => "missing_input",
            CliError::RunExists(_) => "run_exists",
            CliError::Usage(_) => "usage",
            CliError::Trainer(_) => "trainer",
            CliError::Eval(_) => "eval",
            CliError::Policy(_) => "policy",
            CliError::Nav(_) => "navsim",
            CliError::Io(_) => "io",
        }
    }

    /// One-line JSON error record.
    pub fn record(&self) -> serde_json::Value {
        let mut v = json!({ "error": self.kind(), "message": self.to_string() });
        match self {
            CliError::Config(ConfigError::Range { line, key, .. }) => {
                v["key"] = json!(key);
                v["line"] = json!(line);
            }
            CliError::Config(ConfigError::UnknownKey { line, key }) => {
                v["key"] = json!(key);
                v["line"] = json!(line);
            }
            CliError::Config(ConfigError::Syntax { line, .. }) => v["line"] = json!(line),
            CliError::MissingInput { path, .. } | CliError::RunExists(path) => v["path"] = json!(path),
            _ => {}
        }
        v
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "entnav",
    version,
    about = "Entropy-gated hybrid reasoning for gridworld object navigation"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// `key = value` config file; defaults to the `--from` run's config, then built-ins.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Extra `key=value` settings applied after the file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Upstream run directory (or checkpoint file for eval commands).
    #[arg(long, global = true)]
    pub from: Option<PathBuf>,
    /// Run directory name under `out`; must not exist yet.
    #[arg(long, global = true)]
    pub run_id: Option<String>,
    /// Worker threads; overrides `workers` from the config.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Nothink,
    Dense,
    Everyk,
    Hybrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    /// Hybrid success and tokens per step over `eval.sweep_taus`.
    Tau,
    /// Hybrid over `eval.sweep_ntw`.
    Ntw,
    /// Q-value of each threshold in `eval.sweep_taus`.
    Qvalue,
    /// Hybrid under each map corruption in `eval.robustness_grid`.
    Robustness,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Collect reflexive expert data.
    GenData,
    /// Bootstrap SFT, entropy filter, annotation and hybrid SFT.
    Sft,
    /// One stage of PPO.
    Rl {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        stage: u8,
    },
    /// Evaluate one strategy on the held-out tasks.
    Eval {
        #[arg(long, value_enum, default_value = "hybrid")]
        strategy: StrategyArg,
        /// Normalized-entropy threshold (hybrid); defaults to `gate.tau`.
        #[arg(long)]
        tau: Option<f64>,
        /// Thinking window K (hybrid, every-K); defaults to `gate.k`.
        #[arg(long)]
        ntw: Option<u32>,
    },
    /// Sweep one gate or corruption parameter.
    Sweep {
        #[arg(value_enum)]
        kind: SweepKind,
    },
    /// Entropy histogram, difficulty strata, pass@k and entropy heatmaps.
    Analyze {
        /// Heatmaps to render.
        #[arg(long, default_value_t = 4)]
        heatmaps: usize,
    },
    /// Every table and plot for one checkpoint.
    Report,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenData => "gen-data",
            Command::Sft => "sft",
            Command::Rl { stage: 1 } => "rl-1",
            Command::Rl { .. } => "rl-2",
            Command::Eval { .. } => "eval",
            Command::Sweep { .. } => "sweep",
            Command::Analyze { .. } => "analyze",
            Command::Report => "report",
        }
    }
}

/// A created run directory.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub id: String,
    pub path: PathBuf,
}

impl RunDir {
    pub fn join(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }
}

/// SHA-256 prefix of the running executable.
pub fn build_hash() -> String {
    std::env::current_exe()
        .and_then(fs::read)
        .map(|b| hex::encode(&Sha256::digest(&b)[..8]))
        .unwrap_or_else(|_| "unknown".into())
}

/// Creates `<cfg.out>/<id>` and writes the resolved config, seed and build
/// info. An existing directory is an error.
pub fn create_run_dir(cfg: &RunConfig, id: Option<&str>, command: &str) -> Result<RunDir, CliError> {
    let id = match id {
        Some(s) if s.is_empty() || s.contains(['/', '\\']) || s == "." || s == ".." => {
            return Err(CliError::Usage(format!("invalid run id `{s}`")))
        }
        Some(s) => s.to_string(),
        None => {
            let ms = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or(0);
            format!("{ms}-{command}-{}", cfg.hash())
        }
    };
    let root = PathBuf::from(&cfg.out);
    fs::create_dir_all(&root)?;
    let path = root.join(&id);
    match fs::create_dir(&path) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => return Err(CliError::RunExists(path)),
        Err(e) => return Err(e.into()),
    }
    fs::write(path.join(CONFIG_FILE), cfg.to_text())?;
    fs::write(path.join("seed.txt"), format!("{}\n", cfg.seed))?;
    let build = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "build_hash": build_hash(),
        "config_hash": cfg.hash(),
        "command": command,
    });
    fs::write(path.join("build.json"), format!("{build:#}\n"))?;
    Ok(RunDir { id, path })
}

fn require(path: PathBuf, why: &str) -> Result<PathBuf, CliError> {
    if path.exists() {
        Ok(path)
    } else {
        Err(CliError::MissingInput {
            path,
            why: why.to_string(),
        })
    }
}

fn from_dir<'a>(common: &'a Common, command: &str) -> Result<&'a Path, CliError> {
    common
        .from
        .as_deref()
        .ok_or_else(|| CliError::Usage(format!("`{command}` needs --from <run dir>")))
}

/// Config for a command: `--config`, else the upstream run's resolved config,
/// else defaults; then `--set` overrides.
pub fn resolve_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut sets = common.set.clone();
    if let Some(w) = common.workers {
        sets.push(format!("workers={w}"));
    }
    if let Some(p) = &common.config {
        return Ok(RunConfig::load(p, &sets)?);
    }
    if let Some(from) = &common.from {
        let dir = if from.is_file() {
            from.parent().unwrap_or(Path::new("."))
        } else {
            from.as_path()
        };
        let upstream = dir.join(CONFIG_FILE);
        if upstream.exists() {
            return Ok(RunConfig::load(&upstream, &sets)?);
        }
    }
    Ok(RunConfig::parse_with("", &sets)?.config)
}

/// Dataset house seeds: `derive(seed, i) mod 1e9`.
pub fn data_house_seeds(cfg: &RunConfig) -> Vec<u64> {
    (0..cfg.data.max_houses as u64)
        .map(|i| seeds::derive(cfg.seed, i) % TRAIN_HOUSE_BASE)
        .collect()
}

pub fn build_houses(seeds: impl IntoIterator<Item = u64>, cfg: &RunConfig) -> Result<Vec<Arc<GridHouse>>, CliError> {
    seeds
        .into_iter()
        .map(|s| Ok(Arc::new(generate_house(s, &cfg.gen_params())?)))
        .collect()
}

/// PPO rollout houses, disjoint from the dataset and evaluation ranges.
pub fn train_houses(cfg: &RunConfig) -> Result<Vec<Arc<GridHouse>>, CliError> {
    build_houses(
        (0..cfg.rl.train_houses as u64).map(|s| TRAIN_HOUSE_BASE + seeds::derive(cfg.seed, s) % 1_000_000),
        cfg,
    )
}

/// Held-out evaluation houses; independent of the run seed.
pub fn eval_houses(cfg: &RunConfig, n: usize) -> Result<Vec<Arc<GridHouse>>, CliError> {
    build_houses((0..n as u64).map(|s| EVAL_HOUSE_BASE + s), cfg)
}

/// `--from` as a checkpoint: a file is used as is; a run directory yields its
/// most advanced checkpoint.
pub fn resolve_checkpoint(from: &Path) -> Result<PathBuf, CliError> {
    if from.is_file() {
        return Ok(from.to_path_buf());
    }
    for name in ["stageII_best.ckpt", "stageI_best.ckpt", "hsft.ckpt"] {
        let p = from.join(name);
        if p.exists() {
            return Ok(p);
        }
    }
    Err(CliError::MissingInput {
        path: from.to_path_buf(),
        why: "no stageII_best.ckpt, stageI_best.ckpt or hsft.ckpt".into(),
    })
}

fn strategy(cfg: &RunConfig, s: StrategyArg, tau: Option<f64>, ntw: Option<u32>) -> Result<Strategy, CliError> {
    let tau = tau.unwrap_or(cfg.gate.tau);
    let k = ntw.unwrap_or(cfg.gate.k);
    if !(0.0..=1.0).contains(&tau) {
        return Err(ConfigError::Range {
            line: None,
            key: "gate.tau".into(),
            msg: format!("--tau must lie in [0, 1], got {tau}"),
        }
        .into());
    }
    Ok(match s {
        StrategyArg::Nothink => Strategy::NoThink,
        StrategyArg::Dense => Strategy::DenseThink,
        StrategyArg::Everyk => Strategy::EveryK { k },
        StrategyArg::Hybrid => Strategy::Hybrid { tau, k },
    })
}

fn eval_seed(cfg: &RunConfig, what: &str) -> u64 {
    seeds::derive_named(cfg.seed, what)
}

fn write_json(path: &Path, v: &impl serde::Serialize) -> Result<(), CliError> {
    let s = serde_json::to_string_pretty(v).map_err(|e| CliError::Usage(e.to_string()))?;
    fs::write(path, s + "\n")?;
    Ok(())
}

fn load_net(common: &Common, command: &str) -> Result<(PolicyNet, PathBuf), CliError> {
    let ckpt = resolve_checkpoint(from_dir(common, command)?)?;
    let (net, _) = load_checkpoint(&ckpt)?;
    info!("loaded {}", ckpt.display());
    Ok((net, ckpt))
}

fn cmd_gen_data(cfg: &RunConfig, run: &RunDir) -> Result<(), CliError> {
    let ds = collect_expert_dataset(&data_house_seeds(cfg), &cfg.collect_config())?;
    let manifest = save_dataset(&ds, &run.join("data"), DATASET_STEM)?;
    info!("{} samples, content hash {}", ds.nrd.len(), manifest.content_hash);
    Ok(())
}

fn cmd_sft(cfg: &RunConfig, common: &Common, run: &RunDir) -> Result<(), CliError> {
    let from = from_dir(common, "sft")?;
    let data = from.join("data");
    require(
        data.join(format!("{DATASET_STEM}.manifest.json")),
        "run `gen-data` first",
    )?;
    let mut ds = load_dataset(&data, DATASET_STEM)?;
    let out = run_sft_pipeline(&mut ds, &cfg.sft_pipeline())?;
    save_dataset(&ds, &run.join("data"), HYBRID_STEM)?;
    save_checkpoint(
        &out.bootstrap_net,
        json!({ "stage": "bootstrap" }),
        &run.join("bootstrap.ckpt"),
    )?;
    save_checkpoint(&out.hsft_net, json!({ "stage": "hsft" }), &run.join("hsft.ckpt"))?;
    write_json(
        &run.join("sft_summary.json"),
        &json!({
            "bootstrap_curve": out.bootstrap_curve,
            "hsft_curve": out.hsft_curve,
            "annotation": out.annotation,
            "reflexive_samples": ds.nrd.len(),
            "thinking_samples": ds.rd.len(),
        }),
    )?;
    Ok(())
}

fn cmd_rl(cfg: &RunConfig, common: &Common, run: &RunDir, stage: u8) -> Result<(), CliError> {
    let from = from_dir(common, "rl")?;
    let houses = train_houses(cfg)?;
    let tcfg = cfg.two_stage();
    let out = if stage == 1 {
        let p = require(
            from.join("hsft.ckpt"),
            "stage 1 starts from the `sft` run's hybrid SFT checkpoint",
        )?;
        let (init, _) = load_checkpoint(&p)?;
        train_stage(&init, None, &houses, Stage::I, &tcfg, Some(&run.path))?
    } else {
        let p = require(
            from.join("stageI_best.ckpt"),
            "stage 2 needs the best stage-1 checkpoint; run `rl --stage 1` first",
        )?;
        let (init, _) = load_checkpoint(&p)?;
        train_stage(&init, Some(&init), &houses, Stage::II, &tcfg, Some(&run.path))?
    };
    write_log(&out.logs, &run.join("train_log.jsonl"))?;
    write_json(
        &run.join("stage_summary.json"),
        &json!({ "best_update": out.best_update, "best_sr": out.best_sr, "initial_sr": out.initial_sr }),
    )?;
    Ok(())
}

fn eval_opts(cfg: &RunConfig) -> EpisodeOptions {
    cfg.eval_options()
}

fn summarize(
    cfg: &RunConfig,
    net: &PolicyNet,
    s: Strategy,
    houses: &[Arc<GridHouse>],
) -> Result<(StrategySummary, Vec<EpisodeRecord>), CliError> {
    let recs = evaluate(net, houses, &cfg.gate_for(s), &eval_opts(cfg), eval_seed(cfg, "eval"))?;
    Ok((StrategySummary::from_records(s.name(), &recs)?, recs))
}

fn cmd_eval(cfg: &RunConfig, common: &Common, run: &RunDir, s: Strategy) -> Result<(), CliError> {
    let (net, _) = load_net(common, "eval")?;
    let houses = eval_houses(cfg, cfg.eval.tasks)?;
    let (summary, records) = summarize(cfg, &net, s, &houses)?;
    info!(
        "{}: SR {:.3} SEL {:.3} tokens/step {:.2}",
        summary.strategy, summary.success_rate, summary.sel, summary.tokens_per_step
    );
    emit_report(
        &Report {
            strategies: vec![summary],
            records,
            ..Report::default()
        },
        &run.path,
    )?;
    Ok(())
}

fn pass_at_k(cfg: &RunConfig, net: &PolicyNet, s: Strategy) -> Result<Vec<(usize, f64)>, CliError> {
    let houses = eval_houses(cfg, cfg.eval.pass_k_tasks)?;
    let gate = cfg.gate_for(s);
    let opts = EpisodeOptions {
        temperature: cfg.eval.pass_k_temperature,
        ..eval_opts(cfg)
    };
    let mut recs = Vec::new();
    for i in 0..cfg.eval.pass_k_samples {
        recs.extend(evaluate(
            net,
            &houses,
            &gate,
            &opts,
            seeds::derive(eval_seed(cfg, "pass_k"), i as u64),
        )?);
    }
    Ok(eval::pass_at_k(&eval::success_counts(&recs), &cfg.eval.pass_ks)?)
}

fn cmd_sweep(cfg: &RunConfig, common: &Common, run: &RunDir, kind: SweepKind) -> Result<(), CliError> {
    let (net, _) = load_net(common, "sweep")?;
    let houses = eval_houses(cfg, cfg.eval.tasks)?;
    let seed = eval_seed(cfg, "eval");
    match kind {
        SweepKind::Tau | SweepKind::Ntw => {
            let points: Vec<(f64, u32)> = if kind == SweepKind::Tau {
                cfg.eval.sweep_taus.iter().map(|&t| (t, cfg.gate.k)).collect()
            } else {
                cfg.eval.sweep_ntw.iter().map(|&k| (cfg.gate.tau, k)).collect()
            };
            let mut csv = String::from("tau,k,sr,sel,tokens_per_step,thinking_ratio\n");
            for (tau, k) in points {
                let (s, _) = summarize(cfg, &net, Strategy::Hybrid { tau, k }, &houses)?;
                csv.push_str(&format!(
                    "{tau:.6},{k},{:.6},{:.6},{:.6},{:.6}\n",
                    s.success_rate, s.sel, s.tokens_per_step, s.thinking_ratio
                ));
            }
            let name = if kind == SweepKind::Tau {
                "tau_sweep.csv"
            } else {
                "ntw_sweep.csv"
            };
            fs::write(run.join(name), csv)?;
        }
        SweepKind::Qvalue => {
            let sweep = q_threshold_sweep(
                &net,
                &houses,
                &cfg.eval.sweep_taus,
                cfg.eval.tasks,
                cfg.eval.q_gamma,
                cfg.gate.k,
                &eval_opts(cfg),
                seed,
            )?;
            info!("argmax tau {:?}", sweep.argmax_tau());
            emit_report(
                &Report {
                    sweep: Some(sweep),
                    ..Report::default()
                },
                &run.path,
            )?;
        }
        SweepKind::Robustness => {
            let grid: Vec<(f64, f64)> = cfg.eval.robustness_grid.iter().map(|p| (p[0], p[1])).collect();
            let mut rows = Vec::new();
            for s in [
                Strategy::NoThink,
                Strategy::Hybrid {
                    tau: cfg.gate.tau,
                    k: cfg.gate.k,
                },
            ] {
                for p in robustness_curve(&net, &houses, &grid, &cfg.gate_for(s), &eval_opts(cfg), seed)? {
                    rows.push(format!(
                        "{},{:.6},{:.6},{:.6},{:.6},{}",
                        s.name(),
                        p.p_drop,
                        p.p_mislabel,
                        p.success_rate,
                        p.sel,
                        p.episodes
                    ));
                }
            }
            fs::write(
                run.join("robustness.csv"),
                format!("strategy,p_drop,p_mislabel,sr,sel,episodes\n{}\n", rows.join("\n")),
            )?;
        }
    }
    Ok(())
}

fn cmd_analyze(cfg: &RunConfig, common: &Common, run: &RunDir, heatmaps: usize) -> Result<(), CliError> {
    let (net, _) = load_net(common, "analyze")?;
    let houses = eval_houses(cfg, cfg.eval.tasks)?;
    let hybrid = Strategy::Hybrid {
        tau: cfg.gate.tau,
        k: cfg.gate.k,
    };
    let (_, reflex) = summarize(cfg, &net, Strategy::NoThink, &houses)?;
    let ents: Vec<f64> = reflex.iter().flat_map(|r| r.entropies.iter().copied()).collect();
    let histogram = entropy_histogram_of(&ents, &cfg.eval.sweep_taus);
    let episodes = evaluate_episodes(
        &net,
        &houses,
        &cfg.gate_for(hybrid),
        &eval_opts(cfg),
        eval_seed(cfg, "eval"),
    )?;
    for e in episodes.iter().take(heatmaps) {
        let pix = entropy_heatmap(&e.record, &e.map)?;
        fs::write(run.join(&format!("heatmap_{}.ppm", e.record.task_id)), pix.to_ppm())?;
    }
    let records: Vec<EpisodeRecord> = episodes.into_iter().map(|e| e.record).collect();
    let [b1, b2] = cfg.eval.strata_edges;
    emit_report(
        &Report {
            histogram: Some(histogram),
            strata: Some(difficulty_stratify(&records, b1, b2)),
            pass_at_k: pass_at_k(cfg, &net, hybrid)?,
            ..Report::default()
        },
        &run.path,
    )?;
    Ok(())
}

fn cmd_report(cfg: &RunConfig, common: &Common, run: &RunDir) -> Result<(), CliError> {
    let (net, ckpt) = load_net(common, "report")?;
    let houses = eval_houses(cfg, cfg.eval.tasks)?;
    let hybrid = Strategy::Hybrid {
        tau: cfg.gate.tau,
        k: cfg.gate.k,
    };
    let mut strategies = Vec::new();
    let mut records = Vec::new();
    let mut reflex_entropies = Vec::new();
    for s in [
        Strategy::NoThink,
        Strategy::DenseThink,
        Strategy::EveryK { k: cfg.gate.k },
        hybrid,
    ] {
        let (summary, recs) = summarize(cfg, &net, s, &houses)?;
        if s == Strategy::NoThink {
            reflex_entropies = recs.iter().flat_map(|r| r.entropies.iter().copied()).collect();
        }
        strategies.push(summary);
        records.extend(recs);
    }
    let hybrid_records: Vec<EpisodeRecord> = records
        .iter()
        .filter(|r| r.strategy == hybrid.name())
        .cloned()
        .collect();
    let [b1, b2] = cfg.eval.strata_edges;
    let grid: Vec<(f64, f64)> = cfg.eval.robustness_grid.iter().map(|p| (p[0], p[1])).collect();
    let report = Report {
        strategies,
        histogram: Some(entropy_histogram_of(&reflex_entropies, &cfg.eval.sweep_taus)),
        sweep: Some(q_threshold_sweep(
            &net,
            &houses,
            &cfg.eval.sweep_taus,
            cfg.eval.tasks,
            cfg.eval.q_gamma,
            cfg.gate.k,
            &eval_opts(cfg),
            eval_seed(cfg, "eval"),
        )?),
        pass_at_k: pass_at_k(cfg, &net, hybrid)?,
        strata: Some(difficulty_stratify(&hybrid_records, b1, b2)),
        robustness: robustness_curve(
            &net,
            &houses,
            &grid,
            &cfg.gate_for(hybrid),
            &eval_opts(cfg),
            eval_seed(cfg, "eval"),
        )?,
        records,
    };
    let files = emit_report(&report, &run.path)?;
    write_json(
        &run.join("report_inputs.json"),
        &json!({ "checkpoint": ckpt, "files": files }),
    )?;
    Ok(())
}

/// Runs one command; returns the created run directory.
pub fn run(cli: &Cli) -> Result<RunDir, CliError> {
    let cfg = resolve_config(&cli.common)?;
    let strategy = match &cli.command {
        Command::Eval { strategy: s, tau, ntw } => Some(strategy(&cfg, *s, *tau, *ntw)?),
        _ => None,
    };
    let needs_from = !matches!(cli.command, Command::GenData);
    if needs_from {
        let from = from_dir(&cli.common, cli.command.name())?;
        if !from.exists() {
            return Err(CliError::MissingInput {
                path: from.to_path_buf(),
                why: "--from does not exist".into(),
            });
        }
    }
    let run = create_run_dir(&cfg, cli.common.run_id.as_deref(), cli.command.name())?;
    if let Some(from) = &cli.common.from {
        fs::write(run.join("from.txt"), format!("{}\n", from.display()))?;
    }
    info!("run {} -> {}", run.id, run.path.display());
    let res = match &cli.command {
        Command::GenData => cmd_gen_data(&cfg, &run),
        Command::Sft => cmd_sft(&cfg, &cli.common, &run),
        Command::Rl { stage } => cmd_rl(&cfg, &cli.common, &run, *stage),
        Command::Eval { .. } => cmd_eval(&cfg, &cli.common, &run, strategy.expect("parsed above")),
        Command::Sweep { kind } => cmd_sweep(&cfg, &cli.common, &run, *kind),
        Command::Analyze { heatmaps } => cmd_analyze(&cfg, &cli.common, &run, *heatmaps),
        Command::Report => cmd_report(&cfg, &cli.common, &run),
    };
    if let Err(e) = &res {
        let _ = fs::write(run.join("error.json"), format!("{}\n", e.record()));
    }
    res.map(|()| run)
}

/// Entry point for the binary: parses args, sets up logging and the worker
/// pool, prints the run directory on success or a JSON error record on stderr.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let workers = match resolve_config(&cli.common) {
        Ok(c) => c.workers,
        Err(e) => {
            eprintln!("{}", e.record());
            return ExitCode::from(2);
        }
    };
    if workers > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
    }
    match run(&cli) {
        Ok(r) => {
            println!("{}", r.path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(1)
        }
    }
}
