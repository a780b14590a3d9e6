use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{decide_and_act, GateConfig, GateError, GateState, StepDecision};
use crate::eval::EpisodeRecord;
use crate::navsim::{expert_action, EnvConfig, EpisodeState, GridHouse};
use crate::policy::{History, Mode, PolicyContext, PolicyNet, PolicyOutput};
use crate::seeds;
use crate::semantic_map::{corrupt_map, map_features, AnnotatedMap, MapFeatureConfig};

/// Anything that can pick the next action from a context.
pub trait Actor: Sync {
    fn act(
        &self,
        env: &EpisodeState,
        ctx: &PolicyContext,
        gate: &GateConfig,
        gs: GateState,
        temperature: f64,
        seed: u64,
    ) -> Result<(StepDecision, GateState), GateError>;

    /// Short-term window size and map featurization the actor expects.
    fn context_shape(&self) -> (usize, MapFeatureConfig);
}

impl Actor for PolicyNet {
    fn act(
        &self,
        _env: &EpisodeState,
        ctx: &PolicyContext,
        gate: &GateConfig,
        gs: GateState,
        temperature: f64,
        seed: u64,
    ) -> Result<(StepDecision, GateState), GateError> {
        decide_and_act(self, ctx, gate, gs, temperature, seed)
    }

    fn context_shape(&self) -> (usize, MapFeatureConfig) {
        (self.config().window, self.config().map)
    }
}

/// Privileged shortest-path expert wearing the policy interface; never thinks.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExpertActor;

impl Actor for ExpertActor {
    fn act(
        &self,
        env: &EpisodeState,
        _ctx: &PolicyContext,
        _gate: &GateConfig,
        gs: GateState,
        _temperature: f64,
        _seed: u64,
    ) -> Result<(StepDecision, GateState), GateError> {
        let action = expert_action(env)?;
        let mut dist = vec![0.0; 5];
        dist[action.id()] = 1.0;
        let output = PolicyOutput {
            mode: Mode::NoThink,
            tokens: vec![action.id()],
            action,
            logprobs: vec![0.0],
            first_action_dist: dist,
            entropy_raw: 0.0,
            entropy_norm: 0.0,
            value: 0.0,
        };
        let decision = StepDecision {
            output,
            prelim_entropy_norm: Some(0.0),
            thought: false,
            tokens_generated: 1,
        };
        Ok((decision, gs.advance(false)))
    }

    fn context_shape(&self) -> (usize, MapFeatureConfig) {
        (4, MapFeatureConfig::default())
    }
}

/// Landmark drop / mislabel rates applied to the map before featurization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Corruption {
    pub p_drop: f64,
    pub p_mislabel: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOptions {
    pub env: EnvConfig,
    pub temperature: f64,
    pub corruption: Option<Corruption>,
    /// Keep per-step contexts and outputs for training.
    pub keep_transitions: bool,
}

impl Default for EpisodeOptions {
    fn default() -> Self {
        Self {
            env: EnvConfig::evaluation(),
            temperature: 0.0,
            corruption: None,
            keep_transitions: false,
        }
    }
}

/// One line of an episode log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub clock: u32,
    pub prelim_entropy_norm: Option<f64>,
    pub thought: bool,
    pub tokens: usize,
    pub action: usize,
    pub reward: f64,
}

/// A decoded step kept for policy optimization.
#[derive(Debug, Clone)]
pub struct Transition {
    pub ctx: PolicyContext,
    pub mode: Mode,
    pub tokens: Vec<usize>,
    pub logprobs: Vec<f64>,
    pub value: f64,
    pub reward: f64,
    /// Last step of the episode (success, `end`, or the step limit).
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub record: EpisodeRecord,
    pub steps: Vec<StepLog>,
    pub transitions: Vec<Transition>,
    /// Final (uncorrupted) map.
    pub map: AnnotatedMap,
}

/// Runs one episode to completion. Step `t` uses seed `derive(seed, t)`.
pub fn run_episode(
    actor: &dyn Actor,
    house: Arc<GridHouse>,
    gate: &GateConfig,
    opts: &EpisodeOptions,
    seed: u64,
) -> Result<Episode, GateError> {
    gate.validate()?;
    let (window, map_cfg) = actor.context_shape();
    let (mut env, obs0) = EpisodeState::reset(house.clone(), opts.env);
    let shortest = env.oracle().episode_length_from(house.start_pose).unwrap_or(u32::MAX);
    let target = house.target_category;
    let mut map = AnnotatedMap::new(house.width, house.height, house.params.num_categories, target);
    map.update(env.pose(), &obs0)?;
    let mut hist = History::new(window, obs0);
    let mut gs = GateState::new(gate);
    let corrupt_stream = seeds::derive_named(seed, "corrupt");

    let mut steps = Vec::new();
    let mut transitions = Vec::new();
    let mut record = EpisodeRecord {
        task_id: house.seed,
        success: false,
        steps: 0,
        shortest,
        tokens_generated: 0,
        thought_steps: 0,
        entropies: Vec::new(),
        rewards: Vec::new(),
        poses: vec![env.pose()],
        actions: Vec::new(),
        thoughts: Vec::new(),
        strategy: gate.strategy.name().to_string(),
        seed,
    };

    while !env.done() {
        let clock = env.clock();
        let feats = match opts.corruption {
            Some(c) => {
                let noisy = corrupt_map(
                    &map,
                    c.p_drop,
                    c.p_mislabel,
                    seeds::derive(corrupt_stream, clock as u64),
                );
                map_features(&noisy, &map_cfg)
            }
            None => map_features(&map, &map_cfg),
        };
        let ctx = hist.context(target, feats, Mode::NoThink);
        let step_seed = seeds::derive(seed, clock as u64);
        let (decision, next) = actor.act(&env, &ctx, gate, gs, opts.temperature, step_seed)?;
        gs = next;
        let action = decision.output.action;
        let outcome = env.step(action)?;
        map.update(env.pose(), &outcome.observation)?;
        hist.push(action, outcome.observation.clone());

        record.tokens_generated += decision.tokens_generated as u64;
        record.thought_steps += u32::from(decision.thought);
        record
            .entropies
            .push(decision.prelim_entropy_norm.unwrap_or(decision.output.entropy_norm));
        record.rewards.push(outcome.reward);
        record.actions.push(action.id() as u8);
        record.thoughts.push(decision.thought);
        record.poses.push(env.pose());
        steps.push(StepLog {
            clock,
            prelim_entropy_norm: decision.prelim_entropy_norm,
            thought: decision.thought,
            tokens: decision.tokens_generated,
            action: action.id(),
            reward: outcome.reward,
        });
        if opts.keep_transitions {
            let out = decision.output;
            transitions.push(Transition {
                ctx: ctx.with_mode(out.mode),
                mode: out.mode,
                tokens: out.tokens,
                logprobs: out.logprobs,
                value: out.value,
                reward: outcome.reward,
                done: outcome.done,
            });
        }
        if outcome.done {
            record.success = outcome.success;
        }
    }
    record.steps = env.clock();
    Ok(Episode {
        record,
        steps,
        transitions,
        map,
    })
}

/// `(tokens per episode, tokens per step, thinking ratio)`.
pub fn token_accounting(record: &EpisodeRecord) -> (u64, f64, f64) {
    let steps = record.steps.max(1) as f64;
    (
        record.tokens_generated,
        record.tokens_generated as f64 / steps,
        record.thought_steps as f64 / steps,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gate::Strategy;
    use crate::navsim::{generate_house, GenParams};
    use crate::policy::test_fixtures::small_net;

    fn house(seed: u64) -> Arc<GridHouse> {
        Arc::new(generate_house(seed, &GenParams::default()).unwrap())
    }

    #[test]
    fn expert_actor_is_optimal() {
        for s in 0..20 {
            let h = house(s);
            let ep = run_episode(
                &ExpertActor,
                h,
                &GateConfig::new(Strategy::NoThink),
                &EpisodeOptions::default(),
                s,
            )
            .unwrap();
            assert!(ep.record.success);
            assert_eq!(ep.record.steps, ep.record.shortest);
            assert_eq!(*ep.record.actions.last().unwrap(), 4);
        }
    }

    #[test]
    fn nothink_tokens_equal_steps() {
        let net = small_net(1);
        let opts = EpisodeOptions {
            env: EnvConfig {
                max_steps: 40,
                ..EnvConfig::default()
            },
            temperature: 1.0,
            ..EpisodeOptions::default()
        };
        let ep = run_episode(&net, house(3), &GateConfig::new(Strategy::NoThink), &opts, 5).unwrap();
        assert_eq!(ep.record.tokens_generated, ep.record.steps as u64);
        let (_, per_step, tr) = token_accounting(&ep.record);
        assert_eq!((per_step, tr), (1.0, 0.0));
    }

    #[test]
    fn one_step_limit() {
        let net = small_net(2);
        let opts = EpisodeOptions {
            env: EnvConfig {
                max_steps: 1,
                ..EnvConfig::default()
            },
            ..EpisodeOptions::default()
        };
        let h = house(4);
        let ep = run_episode(&net, h, &GateConfig::new(Strategy::DenseThink), &opts, 0).unwrap();
        assert_eq!(ep.record.steps, 1);
        if ep.record.actions[0] != 4 {
            assert!(!ep.record.success);
        }
    }

    #[test]
    fn accounting_fixture() {
        let mut r = EpisodeRecord::empty("hybrid");
        r.steps = 10;
        r.tokens_generated = 8 + 2 * (1 + 6);
        r.thought_steps = 2;
        assert_eq!(token_accounting(&r), (22, 2.2, 0.2));
        r.tokens_generated = 10;
        r.thought_steps = 0;
        assert_eq!(token_accounting(&r), (10, 1.0, 0.0));
    }
}
