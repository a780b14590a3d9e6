//! Rollout collection and generalized advantage estimation.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::TrainerError;
use crate::eval::EpisodeRecord;
use crate::gate::{run_episode, EpisodeOptions, GateConfig, Strategy, Transition};
use crate::navsim::GridHouse;
use crate::policy::{Mode, PolicyNet};
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    I,
    II,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::I => "I",
            Stage::II => "II",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    /// Episode-ordered transitions; `done` marks each episode's last step.
    pub transitions: Vec<Transition>,
    pub episodes: Vec<EpisodeRecord>,
    /// Advantages used by the policy term (normalized if requested).
    pub advantages: Vec<f64>,
    pub raw_advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// 1 for sequences decoded in thinking mode.
    pub fn indicator(&self, i: usize) -> u8 {
        u8::from(self.transitions[i].mode == Mode::Think)
    }

    pub fn has_advantages(&self) -> bool {
        self.advantages.len() == self.transitions.len() && !self.transitions.is_empty()
    }
}

/// Collects `n_episodes` sampled episodes. Stage I decodes reflexively only;
/// stage II uses the hybrid strategy taken from `gate` (which must be Hybrid).
/// Episode `i` runs on `houses[i % houses.len()]`.
pub fn collect_rollouts(
    net: &PolicyNet,
    houses: &[Arc<GridHouse>],
    stage: Stage,
    gate: &GateConfig,
    n_episodes: usize,
    opts: &EpisodeOptions,
    seed: u64,
) -> Result<RolloutBuffer, TrainerError> {
    if houses.is_empty() {
        return Err(TrainerError::Data("no rollout houses".into()));
    }
    let gate = match (stage, gate.strategy) {
        (Stage::I, _) => GateConfig {
            strategy: Strategy::NoThink,
            ..*gate
        },
        (Stage::II, Strategy::Hybrid { .. }) => *gate,
        (Stage::II, s) => return Err(TrainerError::Data(format!("stage II needs a hybrid gate, got {s:?}"))),
    };
    let opts = EpisodeOptions {
        keep_transitions: true,
        ..opts.clone()
    };
    let eps = (0..n_episodes)
        .into_par_iter()
        .map(|i| {
            run_episode(
                net,
                houses[i % houses.len()].clone(),
                &gate,
                &opts,
                seeds::derive(seed, i as u64),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut buf = RolloutBuffer::default();
    for e in eps {
        buf.transitions.extend(e.transitions);
        buf.episodes.push(e.record);
    }
    Ok(buf)
}

/// GAE over one flat trajectory list. `done[t]` ends an episode; the value
/// after a terminal step is taken as zero (step-limit cut-offs included).
pub fn gae(rewards: &[f64], values: &[f64], dones: &[bool], gamma: f64, lambda: f64) -> Vec<f64> {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * live * next_value - values[t];
        adv[t] = delta + gamma * lambda * live * next_adv;
        next_adv = adv[t];
        next_value = values[t];
    }
    adv
}

/// Fills advantages and returns. With `normalize`, advantages are shifted and
/// scaled to zero mean and unit variance over the sequences that enter the
/// policy term (all in stage I, thinking ones in stage II).
pub fn compute_gae(buf: &mut RolloutBuffer, gamma: f64, lambda: f64, normalize: bool, stage: Stage) {
    let rewards: Vec<f64> = buf.transitions.iter().map(|t| t.reward).collect();
    let values: Vec<f64> = buf.transitions.iter().map(|t| t.value).collect();
    let dones: Vec<bool> = buf.transitions.iter().map(|t| t.done).collect();
    let raw = gae(&rewards, &values, &dones, gamma, lambda);
    buf.returns = raw.iter().zip(&values).map(|(a, v)| a + v).collect();
    buf.advantages = raw.clone();
    buf.raw_advantages = raw;
    if !normalize {
        return;
    }
    let selected: Vec<usize> = (0..buf.len())
        .filter(|&i| stage == Stage::I || buf.indicator(i) == 1)
        .collect();
    if selected.is_empty() {
        return;
    }
    let n = selected.len() as f64;
    let mean = selected.iter().map(|&i| buf.advantages[i]).sum::<f64>() / n;
    let var = selected
        .iter()
        .map(|&i| (buf.advantages[i] - mean).powi(2))
        .sum::<f64>()
        / n;
    let std = var.sqrt().max(1e-8);
    for &i in &selected {
        buf.advantages[i] = (buf.advantages[i] - mean) / std;
    }
}
