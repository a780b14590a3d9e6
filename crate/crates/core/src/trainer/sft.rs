//! Hybrid supervised fine-tuning: mean over samples of the summed token NLL.

use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::ExpertSample;
use super::TrainerError;
use crate::policy::{check_tokens, Adam, AdamConfig, ContextCode, LossGraph, Mode, PolicyNet, SeqGrad};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub max_grad_norm: f64,
    pub seed: u64,
}

impl Default for SftConfig {
    fn default() -> Self {
        Self {
            epochs: 1,
            batch: 256,
            lr: 2e-3,
            max_grad_norm: 1.0,
            seed: 0,
        }
    }
}

/// A training item with its context already encoded.
#[derive(Debug, Clone)]
pub struct SftItem {
    pub code: ContextCode,
    pub mode: Mode,
    pub tokens: Vec<usize>,
}

pub fn encode_samples<'a>(
    net: &PolicyNet,
    samples: impl IntoIterator<Item = &'a ExpertSample>,
) -> Result<Vec<SftItem>, TrainerError> {
    samples
        .into_iter()
        .map(|s| {
            check_tokens(s.context.mode, &s.target_tokens)?;
            Ok(SftItem {
                code: net.encode_code(&s.context)?,
                mode: s.context.mode,
                tokens: s.target_tokens.clone(),
            })
        })
        .collect()
}

/// Loss graph for `mean_i Σ_l -log p(y_il)` over `items`.
pub fn sft_loss_graph(net: &PolicyNet, items: &[&SftItem]) -> LossGraph {
    let w = 1.0 / items.len().max(1) as f64;
    let mut g = LossGraph::default();
    for it in items {
        let cache = net.forward_seq(&it.code, it.mode, &it.tokens);
        let mut sg = SeqGrad::zeros(cache.len());
        for l in 0..cache.len() {
            g.loss -= w * cache.logprobs[l];
            sg.add_logprob(&cache, l, -w);
        }
        g.push(cache, sg);
    }
    g
}

/// Mean per-sample NLL without building gradients.
pub fn sft_loss(net: &PolicyNet, items: &[SftItem]) -> f64 {
    let total: f64 = items
        .iter()
        .map(|it| {
            -net.forward_seq(&it.code, it.mode, &it.tokens)
                .logprobs
                .iter()
                .sum::<f64>()
        })
        .sum();
    total / items.len().max(1) as f64
}

/// Trains on pre-encoded items; returns the mean training loss of each epoch.
pub fn hsft_train_items(net: &mut PolicyNet, items: &[SftItem], cfg: &SftConfig) -> Result<Vec<f64>, TrainerError> {
    if items.is_empty() {
        return Err(TrainerError::Data("H-SFT on an empty dataset".into()));
    }
    let mut opt = Adam::new(
        AdamConfig {
            lr: cfg.lr,
            max_grad_norm: cfg.max_grad_norm,
            ..AdamConfig::default()
        },
        net.num_params(),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..items.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for chunk in order.chunks(cfg.batch.max(1)) {
            let batch: Vec<&SftItem> = chunk.iter().map(|&i| &items[i]).collect();
            let graph = sft_loss_graph(net, &batch);
            if !graph.loss.is_finite() {
                return Err(TrainerError::NonFinite(format!(
                    "H-SFT loss {} at epoch {epoch}, batch of {}",
                    graph.loss,
                    batch.len()
                )));
            }
            sum += graph.loss * batch.len() as f64;
            let grads = net.backward(&graph)?;
            if cfg.lr > 0.0 {
                opt.step(net, grads);
            }
        }
        let mean = sum / items.len() as f64;
        debug!("H-SFT epoch {epoch}: loss {mean:.4}");
        curve.push(mean);
    }
    Ok(curve)
}

/// H-SFT over the given samples (reflexive and thinking mixed).
pub fn hsft_train<'a>(
    net: &mut PolicyNet,
    samples: impl IntoIterator<Item = &'a ExpertSample>,
    cfg: &SftConfig,
) -> Result<Vec<f64>, TrainerError> {
    let items = encode_samples(net, samples)?;
    hsft_train_items(net, &items, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::vocab::{ACTION_TOKENS, REASONING_TOKENS};
    use crate::policy::{PolicyConfig, PolicyNet};
    use crate::trainer::data::{annotate_reasoning, collect_expert_dataset, CollectConfig};

    fn samples(n: usize) -> Vec<ExpertSample> {
        let ds = collect_expert_dataset(
            &(0..40).collect::<Vec<_>>(),
            &CollectConfig {
                n_steps: n,
                ..CollectConfig::default()
            },
        )
        .unwrap();
        let subset: Vec<&ExpertSample> = ds.nrd.iter().step_by(3).collect();
        let (rd, _) = annotate_reasoning(&subset, 0.1, 8, 0);
        ds.nrd.into_iter().chain(rd).collect()
    }

    fn net() -> PolicyNet {
        PolicyNet::new(PolicyConfig {
            hidden: 32,
            ..PolicyConfig::default()
        })
    }

    #[test]
    fn untrained_loss_near_uniform_baseline() {
        let s = samples(60);
        let n = net();
        let items = encode_samples(&n, &s).unwrap();
        let expected: f64 = items
            .iter()
            .map(|it| {
                it.tokens
                    .iter()
                    .map(|&t| {
                        let m = if t < 5 { ACTION_TOKENS } else { REASONING_TOKENS };
                        (m.len() as f64).ln()
                    })
                    .sum::<f64>()
            })
            .sum::<f64>()
            / items.len() as f64;
        let got = sft_loss(&n, &items);
        assert!((got - expected).abs() / expected < 0.05, "{got} vs {expected}");
    }

    #[test]
    fn loss_decreases_on_fixture() {
        let s = samples(100);
        let mut n = net();
        let cfg = SftConfig {
            epochs: 3,
            batch: 16,
            lr: 2e-3,
            ..SftConfig::default()
        };
        let curve = hsft_train(&mut n, &s, &cfg).unwrap();
        assert!(curve[1] < curve[0] && curve[2] < curve[1], "{curve:?}");
    }

    #[test]
    fn memorizes_ten_samples() {
        let s: Vec<ExpertSample> = samples(60).into_iter().rev().take(10).collect();
        let mut n = net();
        let cfg = SftConfig {
            epochs: 200,
            batch: 10,
            lr: 5e-3,
            ..SftConfig::default()
        };
        hsft_train(&mut n, &s, &cfg).unwrap();
        let items = encode_samples(&n, &s).unwrap();
        for it in &items {
            let c = n.forward_seq(&it.code, it.mode, &it.tokens);
            for (l, &t) in it.tokens.iter().enumerate() {
                let best = c.masks[l]
                    .clone()
                    .max_by(|&a, &b| c.probs[l][a].total_cmp(&c.probs[l][b]))
                    .unwrap();
                assert_eq!(best, t);
            }
        }
    }

    #[test]
    fn zero_lr_is_identity() {
        let s = samples(30);
        let mut n = net();
        let before = n.clone();
        hsft_train(
            &mut n,
            &s,
            &SftConfig {
                lr: 0.0,
                ..SftConfig::default()
            },
        )
        .unwrap();
        assert_eq!(n, before);
    }
}
