//! Entropy gating between reflexive and thinking decoding, the baseline
//! strategies, and the episode runner that ties env, map, policy and gate
//! together.

mod episode;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::navsim::NavError;
use crate::policy::{Mode, PolicyContext, PolicyError, PolicyNet, PolicyOutput};
use crate::seeds;
use crate::semantic_map::MapError;

pub use episode::{
    run_episode, token_accounting, Actor, Corruption, Episode, EpisodeOptions, ExpertActor, StepLog, Transition,
};

#[derive(Debug, Error)]
pub enum GateError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Nav(#[from] NavError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("invalid gate config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    NoThink,
    DenseThink,
    EveryK { k: u32 },
    Hybrid { tau: f64, k: u32 },
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::NoThink => "nothink",
            Strategy::DenseThink => "dense",
            Strategy::EveryK { .. } => "everyk",
            Strategy::Hybrid { .. } => "hybrid",
        }
    }

    /// Window size; zero for strategies without one.
    pub fn window(&self) -> u32 {
        match self {
            Strategy::EveryK { k } | Strategy::Hybrid { k, .. } => *k,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateConfig {
    pub strategy: Strategy,
    pub max_trace_len: usize,
}

impl GateConfig {
    pub fn new(strategy: Strategy) -> Self {
        Self {
            strategy,
            max_trace_len: 8,
        }
    }

    /// `Hybrid(0.6, 5)`.
    pub fn hybrid_default() -> Self {
        Self::new(Strategy::Hybrid { tau: 0.6, k: 5 })
    }

    /// `tau` must be finite and non-negative. Values above 1 are accepted and
    /// never trigger, since normalized entropy is at most 1.
    pub fn validate(&self) -> Result<(), GateError> {
        if let Strategy::Hybrid { tau, .. } = self.strategy {
            if !(tau >= 0.0 && tau.is_finite()) {
                return Err(GateError::Config(format!("tau must be finite and >= 0, got {tau}")));
            }
        }
        Ok(())
    }
}

/// Steps since the last thinking step.
///
/// Starts at `K` so the first step may think. Thinking is allowed when the
/// counter is at least `K`; a thinking step resets it to 0 and every step then
/// adds one, so consecutive thoughts are at least `K` steps apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateState {
    pub steps_since_think: u32,
}

impl GateState {
    pub fn new(cfg: &GateConfig) -> Self {
        Self {
            steps_since_think: cfg.strategy.window(),
        }
    }

    fn eligible(&self, k: u32) -> bool {
        self.steps_since_think >= k
    }

    fn advance(self, thought: bool) -> Self {
        let base = if thought { 0 } else { self.steps_since_think };
        Self {
            steps_since_think: base.saturating_add(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDecision {
    /// The executed output.
    pub output: PolicyOutput,
    /// Normalized entropy of the reflexive pass; `None` when no reflexive
    /// pass ran (dense thinking, or an every-K thinking step).
    pub prelim_entropy_norm: Option<f64>,
    pub thought: bool,
    /// Tokens decoded this step, including a discarded reflexive action.
    pub tokens_generated: usize,
}

/// Seed used for the thinking pass of a step.
pub fn think_seed(seed: u64) -> u64 {
    seeds::derive(seed, 1)
}

/// One gated decision. The reflexive pass uses `seed`; any thinking pass uses
/// [`think_seed`], so strategies that agree on a decision produce the same output.
pub fn decide_and_act(
    net: &PolicyNet,
    ctx: &PolicyContext,
    cfg: &GateConfig,
    gs: GateState,
    temperature: f64,
    seed: u64,
) -> Result<(StepDecision, GateState), GateError> {
    let code = net.encode_code(ctx)?;
    let think = |net: &PolicyNet| net.act_think_code(&code, cfg.max_trace_len, temperature, think_seed(seed));
    let reflex = |net: &PolicyNet| net.act_nothink_code(&code, temperature, seed);
    let decision = match cfg.strategy {
        Strategy::NoThink => {
            let out = reflex(net)?;
            StepDecision {
                prelim_entropy_norm: Some(out.entropy_norm),
                output: out,
                thought: false,
                tokens_generated: 1,
            }
        }
        Strategy::DenseThink => {
            let out = think(net)?;
            StepDecision {
                prelim_entropy_norm: None,
                tokens_generated: out.tokens.len(),
                output: out,
                thought: true,
            }
        }
        Strategy::EveryK { k } => {
            if gs.eligible(k) {
                let out = think(net)?;
                StepDecision {
                    prelim_entropy_norm: None,
                    tokens_generated: out.tokens.len(),
                    output: out,
                    thought: true,
                }
            } else {
                let out = reflex(net)?;
                StepDecision {
                    prelim_entropy_norm: Some(out.entropy_norm),
                    output: out,
                    thought: false,
                    tokens_generated: 1,
                }
            }
        }
        Strategy::Hybrid { tau, k } => {
            let pre = reflex(net)?;
            let h = pre.entropy_norm;
            if h >= tau && gs.eligible(k) {
                let out = think(net)?;
                StepDecision {
                    prelim_entropy_norm: Some(h),
                    tokens_generated: 1 + out.tokens.len(),
                    output: out,
                    thought: true,
                }
            } else {
                StepDecision {
                    prelim_entropy_norm: Some(h),
                    output: pre,
                    thought: false,
                    tokens_generated: 1,
                }
            }
        }
    };
    debug_assert!(!decision.thought || decision.output.mode == Mode::Think);
    let next = gs.advance(decision.thought);
    Ok((decision, next))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::test_fixtures::{fixture_ctx, small_net};

    #[test]
    fn counter_gap_is_k() {
        let cfg = GateConfig::new(Strategy::EveryK { k: 3 });
        let mut gs = GateState::new(&cfg);
        let mut thoughts = vec![];
        for t in 0..12 {
            let think = gs.eligible(3);
            if think {
                thoughts.push(t);
            }
            gs = gs.advance(think);
        }
        assert_eq!(thoughts, vec![0, 3, 6, 9]);
    }

    #[test]
    fn hybrid_threshold_and_window() {
        let net = small_net(8);
        let ctx = fixture_ctx(&net, 2, Mode::NoThink);
        let h = net.act_nothink(&ctx, 0.0, 0).unwrap().entropy_norm;
        let below = GateConfig::new(Strategy::Hybrid { tau: h + 1e-9, k: 5 });
        let (d, s) = decide_and_act(&net, &ctx, &below, GateState::new(&below), 0.0, 0).unwrap();
        assert!(!d.thought);
        assert_eq!(d.tokens_generated, 1);
        assert_eq!(s.steps_since_think, 6);

        let above = GateConfig::new(Strategy::Hybrid { tau: h - 1e-9, k: 5 });
        let blocked = GateState { steps_since_think: 2 };
        let (d, s) = decide_and_act(&net, &ctx, &above, blocked, 0.0, 0).unwrap();
        assert!(!d.thought);
        assert_eq!(s.steps_since_think, 3);

        let (d, s) = decide_and_act(&net, &ctx, &above, GateState::new(&above), 0.0, 0).unwrap();
        assert!(d.thought);
        assert_eq!(d.output.mode, Mode::Think);
        assert_eq!(d.tokens_generated, 1 + d.output.tokens.len());
        assert_eq!(s.steps_since_think, 1);
    }

    #[test]
    fn mode_field_is_overridden() {
        let net = small_net(9);
        let ctx = fixture_ctx(&net, 1, Mode::Think);
        let cfg = GateConfig::new(Strategy::NoThink);
        let (d, _) = decide_and_act(&net, &ctx, &cfg, GateState::new(&cfg), 1.0, 3).unwrap();
        assert_eq!(d.output.mode, Mode::NoThink);
        assert_eq!(d.output.tokens.len(), 1);
    }

    #[test]
    fn tau_validation() {
        assert!(GateConfig::new(Strategy::Hybrid { tau: f64::NAN, k: 1 })
            .validate()
            .is_err());
        assert!(GateConfig::new(Strategy::Hybrid { tau: -0.1, k: 1 })
            .validate()
            .is_err());
        assert!(GateConfig::new(Strategy::Hybrid { tau: 1.5, k: 1 }).validate().is_ok());
    }
}
