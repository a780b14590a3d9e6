//! Two-mode token policy: context encoding, constrained decoding, entropy,
//! re-scoring, gradients, checkpoints and the optimizer.

mod checkpoint;
mod context;
mod decode;
mod entropy;
mod net;
mod optim;
pub mod vocab;

use thiserror::Error;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointHeader, CheckpointParam,
    CHECKPOINT_MAGIC,
};
pub use context::{action_class, cell_class, History, Mode, PolicyContext, ACTION_CLASSES, CELL_CLASSES};
pub use decode::{check_tokens, PolicyOutput};
pub use entropy::action_entropy;
pub use net::{
    categorical_kl, masked_logprob, masked_softmax, position_mask, ContextCode, Gradients, LossGraph, ParamSpec,
    PolicyConfig, PolicyNet, SeqCache, SeqGrad,
};
pub use optim::{clip_grad_norm, Adam, AdamConfig};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("malformed context: {0}")]
    BadContext(String),
    #[error("loss is not finite: {0}")]
    NonFiniteLoss(f64),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("expected {expected:?} context, got {got:?}")]
    ModeMismatch { expected: Mode, got: Mode },
    #[error("illegal token sequence: {0}")]
    IllegalTokens(String),
    #[error("temperature must be >= 0, got {0}")]
    BadTemperature(f64),
    #[error("distribution sums to {0}, not 1")]
    NotNormalized(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[cfg(test)]
pub(crate) mod test_fixtures {
    use super::*;
    use crate::navsim::{generate_house, EnvConfig, EpisodeState, GenParams, NavAction};
    use crate::semantic_map::{map_features, AnnotatedMap};
    use std::sync::Arc;

    pub fn small_cfg(seed: u64) -> PolicyConfig {
        PolicyConfig {
            hidden: 16,
            init_seed: seed,
            ..PolicyConfig::default()
        }
    }

    pub fn small_net(seed: u64) -> PolicyNet {
        let mut net = PolicyNet::new(small_cfg(seed));
        // make the output head non-trivial so distributions are not near uniform
        let spec = net.spec("out_w").unwrap().clone();
        let mut s = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) | 1;
        for v in &mut net.params_mut()[spec.offset..spec.offset + spec.len] {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            *v = ((s >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 1.5;
        }
        net.round_params();
        net
    }

    /// Context after a few steps in a generated house.
    pub fn fixture_ctx(net: &PolicyNet, steps: usize, mode: Mode) -> PolicyContext {
        let house = Arc::new(generate_house(11, &GenParams::default()).unwrap());
        let (mut env, obs0) = EpisodeState::reset(house.clone(), EnvConfig::default());
        let mut map = AnnotatedMap::new(house.width, house.height, 12, house.target_category);
        map.update(env.pose(), &obs0).unwrap();
        let mut hist = History::new(net.config().window, obs0);
        let script = [
            NavAction::RotateLeft,
            NavAction::MoveAhead,
            NavAction::RotateRight,
            NavAction::MoveAhead,
        ];
        for a in script.iter().cycle().take(steps) {
            let out = env.step(*a).unwrap();
            map.update(env.pose(), &out.observation).unwrap();
            hist.push(*a, out.observation);
        }
        let feats = map_features(&map, &net.config().map);
        hist.context(house.target_category, feats, mode)
    }
}
