//! Clipped, mode-masked PPO with exact KL anchoring.
//!
//! Per minibatch the loss is a token-level mean over every token `T` in it:
//!
//! `L = (1/T) [ Σ_{policy tokens} -min(ρA, clip(ρ, 1-ε, 1+ε)A) + β Σ_{anchored positions} KL(π_θ ‖ π_ref) ]
//!      + c_v · mean_seq (V - R)^2`
//!
//! Stage I puts every sequence in the policy term and anchors nothing. Stage
//! II puts thinking sequences in the policy term and anchors the reflexive ones.

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::rollout::{RolloutBuffer, Stage};
use super::TrainerError;
use crate::policy::{categorical_kl, Adam, ContextCode, LossGraph, Mode, PolicyNet, SeqGrad};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    /// KL weight for stage II (stage I always uses 0).
    pub beta: f64,
    pub rollout_episodes: usize,
    pub minibatch: usize,
    pub lr: f64,
    pub epochs: usize,
    pub updates_per_stage: usize,
    pub value_coef: f64,
    /// The value head predicts returns divided by this.
    pub value_scale: f64,
    pub max_grad_norm: f64,
    pub normalize_advantages: bool,
    /// Sampling temperature during rollouts.
    pub temperature: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.2,
            beta: 0.1,
            rollout_episodes: 48,
            minibatch: 384,
            lr: 3e-4,
            epochs: 4,
            updates_per_stage: 10,
            value_coef: 0.5,
            value_scale: 10.0,
            max_grad_norm: 0.5,
            normalize_advantages: true,
            temperature: 1.0,
        }
    }
}

impl PpoConfig {
    pub fn beta_for(&self, stage: Stage) -> f64 {
        match stage {
            Stage::I => 0.0,
            Stage::II => self.beta,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PpoStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub mean_kl: f64,
    pub clip_fraction: f64,
    pub minibatches: usize,
    pub skipped: usize,
}

/// Per-update inputs that do not change across epochs.
pub struct PpoBatch<'a> {
    pub buf: &'a RolloutBuffer,
    pub codes: Vec<ContextCode>,
    /// Reference distributions for anchored sequences (`None` elsewhere).
    pub reference: Vec<Option<Vec<Vec<f64>>>>,
}

impl<'a> PpoBatch<'a> {
    pub fn new(
        net: &PolicyNet,
        ref_net: Option<&PolicyNet>,
        buf: &'a RolloutBuffer,
        stage: Stage,
        beta: f64,
    ) -> Result<Self, TrainerError> {
        if !buf.has_advantages() {
            return Err(TrainerError::Data("ppo update before compute_gae".into()));
        }
        let codes = buf
            .transitions
            .iter()
            .map(|t| net.encode_code(&t.ctx))
            .collect::<Result<Vec<_>, _>>()?;
        let reference = buf
            .transitions
            .iter()
            .zip(&codes)
            .map(|(t, code)| match (stage, t.mode, ref_net) {
                (Stage::II, Mode::NoThink, Some(r)) if beta != 0.0 => {
                    Ok(Some(r.forward_seq(code, t.mode, &t.tokens).probs))
                }
                (Stage::II, Mode::NoThink, None) if beta != 0.0 => Err(TrainerError::Data(
                    "stage II with beta > 0 needs a reference net".into(),
                )),
                _ => Ok(None),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { buf, codes, reference })
    }
}

fn in_policy_term(stage: Stage, mode: Mode) -> bool {
    stage == Stage::I || mode == Mode::Think
}

/// Loss graph for one minibatch of buffer indices.
pub fn ppo_loss_graph(
    net: &PolicyNet,
    batch: &PpoBatch<'_>,
    idx: &[usize],
    stage: Stage,
    cfg: &PpoConfig,
) -> (LossGraph, PpoStats) {
    let beta = cfg.beta_for(stage);
    let buf = batch.buf;
    let total_tokens: usize = idx.iter().map(|&i| buf.transitions[i].tokens.len()).sum();
    let inv_t = 1.0 / total_tokens.max(1) as f64;
    let inv_n = 1.0 / idx.len().max(1) as f64;
    let mut g = LossGraph::default();
    let mut st = PpoStats::default();
    let (mut kl_sum, mut kl_n, mut pol_n, mut clipped) = (0.0, 0usize, 0usize, 0usize);
    for &i in idx {
        let t = &buf.transitions[i];
        let cache = net.forward_seq(&batch.codes[i], t.mode, &t.tokens);
        let mut sg = SeqGrad::zeros(cache.len());
        if in_policy_term(stage, t.mode) {
            let a = buf.advantages[i];
            for l in 0..cache.len() {
                let ratio = (cache.logprobs[l] - t.logprobs[l]).exp();
                let clipped_ratio = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip);
                let (u, c) = (ratio * a, clipped_ratio * a);
                pol_n += 1;
                let term = u.min(c);
                g.loss -= inv_t * term;
                st.policy_loss -= term;
                if u <= c {
                    // d(ρA)/d log π = ρA
                    sg.add_logprob(&cache, l, -inv_t * u);
                } else {
                    clipped += 1;
                }
            }
        } else if beta != 0.0 {
            let reference = batch.reference[i]
                .as_ref()
                .expect("reference computed for anchored sequences");
            for l in 0..cache.len() {
                let kl = sg.add_kl(&cache, l, &reference[l], beta * inv_t);
                g.loss += beta * inv_t * kl;
                kl_sum += kl;
                kl_n += 1;
            }
        }
        let err = cache.value - buf.returns[i] / cfg.value_scale;
        st.value_loss += err * err * inv_n;
        if cfg.value_coef != 0.0 {
            g.loss += cfg.value_coef * inv_n * err * err;
            sg.dvalue = 2.0 * cfg.value_coef * inv_n * err;
        }
        g.push(cache, sg);
    }
    st.policy_loss /= pol_n.max(1) as f64;
    st.mean_kl = if kl_n > 0 { kl_sum / kl_n as f64 } else { 0.0 };
    st.clip_fraction = clipped as f64 / pol_n.max(1) as f64;
    st.minibatches = 1;
    (g, st)
}

/// `epochs` passes of shuffled minibatches over the buffer.
pub fn ppo_update(
    net: &mut PolicyNet,
    opt: &mut Adam,
    ref_net: Option<&PolicyNet>,
    buf: &RolloutBuffer,
    stage: Stage,
    cfg: &PpoConfig,
    seed: u64,
) -> Result<PpoStats, TrainerError> {
    let batch = PpoBatch::new(net, ref_net, buf, stage, cfg.beta_for(stage))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..buf.len()).collect();
    let mut acc = PpoStats::default();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.minibatch.max(1)) {
            let (graph, st) = ppo_loss_graph(net, &batch, chunk, stage, cfg);
            if !graph.loss.is_finite() {
                warn!("skipping minibatch with non-finite loss {}", graph.loss);
                acc.skipped += 1;
                continue;
            }
            let grads = net.backward(&graph)?;
            if !grads.is_finite() {
                warn!("skipping minibatch with non-finite gradients");
                acc.skipped += 1;
                continue;
            }
            if cfg.lr > 0.0 {
                opt.step(net, grads);
            }
            acc.policy_loss += st.policy_loss;
            acc.value_loss += st.value_loss;
            acc.mean_kl += st.mean_kl;
            acc.clip_fraction += st.clip_fraction;
            acc.minibatches += 1;
        }
    }
    let n = acc.minibatches.max(1) as f64;
    acc.policy_loss /= n;
    acc.value_loss /= n;
    acc.mean_kl /= n;
    acc.clip_fraction /= n;
    Ok(acc)
}

/// Mean per-position exact KL(π_net ‖ π_ref) over reflexive decoding of `contexts`.
pub fn mean_reflex_kl(
    net: &PolicyNet,
    reference: &PolicyNet,
    contexts: &[crate::policy::PolicyContext],
) -> Result<f64, TrainerError> {
    let mut sum = 0.0;
    for ctx in contexts {
        let c = ctx.with_mode(Mode::NoThink);
        let (_, p, _) = net.forward_logprobs(&c, &[0])?;
        let (_, q, _) = reference.forward_logprobs(&c, &[0])?;
        sum += categorical_kl(&p[0][..5], &q[0][..5]);
    }
    Ok(sum / contexts.len().max(1) as f64)
}
