//! Stage I (reflexive rollouts) then stage II (hybrid rollouts, KL-anchored to
//! the stage-I pick), each keeping the update with the best rollout success.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use log::info;
use serde::{Deserialize, Serialize};

use super::ppo::{ppo_update, PpoConfig};
use super::rollout::{collect_rollouts, compute_gae, RolloutBuffer, Stage};
use super::TrainerError;
use crate::gate::{token_accounting, EpisodeOptions, GateConfig};
use crate::navsim::{EnvConfig, GridHouse};
use crate::policy::{save_checkpoint, Adam, AdamConfig, PolicyNet};
use crate::seeds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageConfig {
    pub ppo: PpoConfig,
    /// Hybrid gate used for stage-II rollouts.
    pub gate: GateConfig,
    pub env: EnvConfig,
    pub seed: u64,
}

impl Default for TwoStageConfig {
    fn default() -> Self {
        Self {
            ppo: PpoConfig::default(),
            gate: GateConfig::hybrid_default(),
            env: EnvConfig::default(),
            seed: 0,
        }
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateLog {
    pub stage: String,
    pub update_idx: usize,
    /// Success rate of the rollouts collected with the updated net.
    pub rollout_sr: f64,
    pub mean_reward: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub mean_kl: f64,
    pub tokens_per_step: f64,
}

#[derive(Debug, Clone)]
pub struct StageOutcome {
    pub best: PolicyNet,
    /// 1-based index of the selected update.
    pub best_update: usize,
    pub best_sr: f64,
    /// Success rate of the rollouts from the input net.
    pub initial_sr: f64,
    pub logs: Vec<UpdateLog>,
}

#[derive(Debug, Clone)]
pub struct TwoStageOutcome {
    pub stage1: StageOutcome,
    pub stage2: StageOutcome,
}

impl TwoStageOutcome {
    pub fn logs(&self) -> impl Iterator<Item = &UpdateLog> {
        self.stage1.logs.iter().chain(&self.stage2.logs)
    }
}

fn rollout_stats(buf: &RolloutBuffer) -> (f64, f64, f64) {
    let n = buf.episodes.len().max(1) as f64;
    let sr = buf.episodes.iter().filter(|e| e.success).count() as f64 / n;
    let reward = buf.episodes.iter().map(|e| e.rewards.iter().sum::<f64>()).sum::<f64>() / n;
    let tps = buf.episodes.iter().map(|e| token_accounting(e).1).sum::<f64>() / n;
    (sr, reward, tps)
}

/// Runs `cfg.ppo.updates_per_stage` updates. Update `n` trains on the
/// rollouts of net `n - 1`; its logged success rate comes from fresh rollouts
/// of net `n`. Ties in success rate keep the earliest update.
pub fn train_stage(
    init: &PolicyNet,
    ref_net: Option<&PolicyNet>,
    houses: &[Arc<GridHouse>],
    stage: Stage,
    cfg: &TwoStageConfig,
    ckpt_dir: Option<&Path>,
) -> Result<StageOutcome, TrainerError> {
    let p = &cfg.ppo;
    let stage_seed = seeds::derive_named(cfg.seed, &format!("stage{}", stage.name()));
    let opts = EpisodeOptions {
        env: cfg.env,
        temperature: p.temperature,
        ..EpisodeOptions::default()
    };
    let collect = |net: &PolicyNet, n: usize| -> Result<RolloutBuffer, TrainerError> {
        let mut buf = collect_rollouts(
            net,
            houses,
            stage,
            &cfg.gate,
            p.rollout_episodes,
            &opts,
            seeds::derive(stage_seed, 2 * n as u64),
        )?;
        // back to return units for GAE
        for t in &mut buf.transitions {
            t.value *= p.value_scale;
        }
        compute_gae(&mut buf, p.gamma, p.lambda, p.normalize_advantages, stage);
        Ok(buf)
    };
    let mut net = init.clone();
    let mut opt = Adam::new(
        AdamConfig {
            lr: p.lr,
            max_grad_norm: p.max_grad_norm,
            ..AdamConfig::default()
        },
        net.num_params(),
    );
    let mut buf = collect(&net, 0)?;
    let initial_sr = rollout_stats(&buf).0;
    info!("stage {}: initial rollout SR {:.3}", stage.name(), initial_sr);
    let mut out = StageOutcome {
        best: init.clone(),
        best_update: 0,
        best_sr: f64::NEG_INFINITY,
        initial_sr,
        logs: Vec::new(),
    };
    for n in 1..=p.updates_per_stage {
        let st = ppo_update(
            &mut net,
            &mut opt,
            ref_net,
            &buf,
            stage,
            p,
            seeds::derive(stage_seed, 2 * n as u64 + 1),
        )?;
        buf = collect(&net, n)?;
        let (sr, reward, tps) = rollout_stats(&buf);
        let log = UpdateLog {
            stage: stage.name().to_string(),
            update_idx: n,
            rollout_sr: sr,
            mean_reward: reward,
            policy_loss: st.policy_loss,
            value_loss: st.value_loss,
            mean_kl: st.mean_kl,
            tokens_per_step: tps,
        };
        info!(
            "stage {} update {n}: SR {sr:.3} reward {reward:.3} pl {:.4} vl {:.4} kl {:.5}",
            stage.name(),
            st.policy_loss,
            st.value_loss,
            st.mean_kl
        );
        if let Some(dir) = ckpt_dir {
            save_checkpoint(
                &net,
                serde_json::to_value(&log).map_err(|e| TrainerError::Data(e.to_string()))?,
                &dir.join(format!("stage{}_update{n}.ckpt", stage.name())),
            )?;
        }
        if sr > out.best_sr {
            out.best_sr = sr;
            out.best_update = n;
            out.best = net.clone();
        }
        out.logs.push(log);
    }
    if out.best_update == 0 {
        out.best_sr = initial_sr;
    }
    if let Some(dir) = ckpt_dir {
        let best_log = out.logs.get(out.best_update.wrapping_sub(1));
        save_checkpoint(
            &out.best,
            serde_json::json!({ "best_update": out.best_update, "rollout_sr": out.best_sr, "log": best_log }),
            &dir.join(format!("stage{}_best.ckpt", stage.name())),
        )?;
    }
    Ok(out)
}

/// Both stages from an H-SFT net. With `out_dir`, every checkpoint and a
/// `train_log.jsonl` are written there.
pub fn train_two_stage(
    init: &PolicyNet,
    houses: &[Arc<GridHouse>],
    cfg: &TwoStageConfig,
    out_dir: Option<&Path>,
) -> Result<TwoStageOutcome, TrainerError> {
    if let Some(d) = out_dir {
        fs::create_dir_all(d)?;
    }
    let stage1 = train_stage(init, None, houses, Stage::I, cfg, out_dir)?;
    let stage2 = train_stage(&stage1.best, Some(&stage1.best), houses, Stage::II, cfg, out_dir)?;
    let out = TwoStageOutcome { stage1, stage2 };
    if let Some(d) = out_dir {
        write_log(out.logs(), &d.join("train_log.jsonl"))?;
    }
    Ok(out)
}

pub fn write_log<'a>(logs: impl IntoIterator<Item = &'a UpdateLog>, path: &Path) -> Result<(), TrainerError> {
    let mut w = BufWriter::new(File::create(path)?);
    for l in logs {
        serde_json::to_writer(&mut w, l).map_err(|e| TrainerError::Data(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
