use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sel, success_rate, EpisodeRecord, EvalError};
use crate::gate::{run_episode, token_accounting, Actor, Corruption, Episode, EpisodeOptions, GateConfig, Strategy};
use crate::navsim::GridHouse;
use crate::seeds;

/// Runs one episode per house (in parallel); house `i` uses seed `derive(seed, i)`.
pub fn evaluate_episodes(
    actor: &dyn Actor,
    houses: &[Arc<GridHouse>],
    gate: &GateConfig,
    opts: &EpisodeOptions,
    seed: u64,
) -> Result<Vec<Episode>, EvalError> {
    houses
        .par_iter()
        .enumerate()
        .map(|(i, h)| run_episode(actor, h.clone(), gate, opts, seeds::derive(seed, i as u64)).map_err(EvalError::from))
        .collect()
}

pub fn evaluate(
    actor: &dyn Actor,
    houses: &[Arc<GridHouse>],
    gate: &GateConfig,
    opts: &EpisodeOptions,
    seed: u64,
) -> Result<Vec<EpisodeRecord>, EvalError> {
    Ok(evaluate_episodes(actor, houses, gate, opts, seed)?
        .into_iter()
        .map(|e| e.record)
        .collect())
}

/// `Σ_t γ^t r_t`.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    rewards.iter().rev().fold(0.0, |acc, r| r + gamma * acc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Normalized-entropy thresholds, strictly increasing.
    pub thresholds: Vec<f64>,
    /// The same thresholds in nats over the five actions.
    pub thresholds_raw: Vec<f64>,
    pub mean_q: Vec<f64>,
    pub mean_tokens_per_step: Vec<f64>,
    pub success_rate: Vec<f64>,
    pub episodes: Vec<usize>,
}

impl SweepResult {
    /// Threshold with the largest mean Q (first on ties).
    pub fn argmax_tau(&self) -> Option<f64> {
        let mut best: Option<usize> = None;
        for i in 0..self.mean_q.len() {
            if best.is_none_or(|b| self.mean_q[i] > self.mean_q[b]) {
                best = Some(i);
            }
        }
        best.map(|i| self.thresholds[i])
    }
}

/// Monte-Carlo Q estimate per threshold: mean discounted return from the
/// episode start over `episodes` Hybrid(τ, K) runs, with shared seeds across τ.
#[allow(clippy::too_many_arguments)]
pub fn q_threshold_sweep(
    actor: &dyn Actor,
    houses: &[Arc<GridHouse>],
    thresholds: &[f64],
    episodes: usize,
    gamma: f64,
    k: u32,
    opts: &EpisodeOptions,
    seed: u64,
) -> Result<SweepResult, EvalError> {
    if thresholds.windows(2).any(|w| w[1] <= w[0]) {
        return Err(EvalError::Invalid("thresholds must be strictly increasing".into()));
    }
    if houses.is_empty() || episodes == 0 {
        return Err(EvalError::Empty("q_threshold_sweep"));
    }
    let tasks: Vec<Arc<GridHouse>> = houses.iter().cycle().take(episodes).cloned().collect();
    let mut out = SweepResult {
        thresholds: thresholds.to_vec(),
        thresholds_raw: thresholds.iter().map(|t| t * 5f64.ln()).collect(),
        mean_q: vec![],
        mean_tokens_per_step: vec![],
        success_rate: vec![],
        episodes: vec![],
    };
    for &tau in thresholds {
        let gate = GateConfig::new(Strategy::Hybrid { tau, k });
        let recs = evaluate(actor, &tasks, &gate, opts, seed)?;
        let n = recs.len() as f64;
        out.mean_q
            .push(recs.iter().map(|r| discounted_return(&r.rewards, gamma)).sum::<f64>() / n);
        out.mean_tokens_per_step
            .push(recs.iter().map(|r| token_accounting(r).1).sum::<f64>() / n);
        out.success_rate.push(success_rate(&recs)?);
        out.episodes.push(recs.len());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessPoint {
    pub p_drop: f64,
    pub p_mislabel: f64,
    pub success_rate: f64,
    pub sel: f64,
    pub episodes: usize,
}

/// Success rate with the map corrupted before every decision, per grid point.
pub fn robustness_curve(
    actor: &dyn Actor,
    houses: &[Arc<GridHouse>],
    grid: &[(f64, f64)],
    gate: &GateConfig,
    opts: &EpisodeOptions,
    seed: u64,
) -> Result<Vec<RobustnessPoint>, EvalError> {
    grid.iter()
        .map(|&(p_drop, p_mislabel)| {
            let o = EpisodeOptions {
                corruption: Some(Corruption { p_drop, p_mislabel }),
                ..opts.clone()
            };
            let recs = evaluate(actor, houses, gate, &o, seed)?;
            Ok(RobustnessPoint {
                p_drop,
                p_mislabel,
                success_rate: success_rate(&recs)?,
                sel: sel(&recs)?,
                episodes: recs.len(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::navsim::{generate_house, EnvConfig, GenParams};
    use crate::policy::test_fixtures::small_net;

    #[test]
    fn discounted_return_fixtures() {
        assert!((discounted_return(&[0.99, 9.99], 0.99) - 10.8801).abs() < 1e-12);
        let fail = discounted_return(&[-0.01; 10], 0.99);
        let closed = -0.01 * (1.0 - 0.99f64.powi(10)) / (1.0 - 0.99);
        assert!((fail - closed).abs() < 1e-12);
        assert!((fail + 0.0956).abs() < 1e-4);
    }

    fn houses(n: u64) -> Vec<Arc<GridHouse>> {
        (0..n)
            .map(|s| Arc::new(generate_house(100 + s, &GenParams::default()).unwrap()))
            .collect()
    }

    #[test]
    fn clean_point_equals_plain_evaluation() {
        let net = small_net(3);
        let hs = houses(4);
        let opts = EpisodeOptions {
            env: EnvConfig {
                max_steps: 30,
                ..EnvConfig::default()
            },
            temperature: 1.0,
            ..EpisodeOptions::default()
        };
        let gate = GateConfig::hybrid_default();
        let plain = evaluate(&net, &hs, &gate, &opts, 5).unwrap();
        let curve = robustness_curve(&net, &hs, &[(0.0, 0.0)], &gate, &opts, 5).unwrap();
        assert_eq!(curve[0].success_rate, success_rate(&plain).unwrap());
        let noisy = EpisodeOptions {
            corruption: Some(Corruption {
                p_drop: 0.0,
                p_mislabel: 0.0,
            }),
            ..opts.clone()
        };
        assert_eq!(evaluate(&net, &hs, &gate, &noisy, 5).unwrap(), plain);
    }

    #[test]
    fn sweep_rejects_unsorted_thresholds() {
        let net = small_net(3);
        let r = q_threshold_sweep(&net, &houses(1), &[0.5, 0.2], 1, 0.99, 5, &EpisodeOptions::default(), 0);
        assert!(r.is_err());
    }
}
