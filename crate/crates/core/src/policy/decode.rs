//! Mode-constrained decoding and teacher-forced re-scoring.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::context::{Mode, PolicyContext};
use super::entropy::action_entropy;
use super::net::{masked_logprob, masked_softmax, ContextCode, PolicyNet};
use super::vocab::{is_action, ACTION_TOKENS, BOS, EOT, NUM_ACTIONS, REASONING_TOKENS, VOCAB_SIZE};
use super::PolicyError;
use crate::navsim::NavAction;

/// One decoded step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyOutput {
    pub mode: Mode,
    pub tokens: Vec<usize>,
    pub action: NavAction,
    pub logprobs: Vec<f64>,
    /// Distribution over the five action tokens at the action position.
    pub first_action_dist: Vec<f64>,
    pub entropy_raw: f64,
    pub entropy_norm: f64,
    pub value: f64,
}

/// Picks a token from `logits` restricted to `mask`. Temperature 0 is argmax
/// with the lowest id winning ties.
fn choose(logits: &[f64], mask: Range<usize>, temperature: f64, rng: &mut ChaCha8Rng) -> usize {
    if temperature <= 0.0 {
        let mut best = mask.start;
        for k in mask {
            if logits[k] > logits[best] {
                best = k;
            }
        }
        return best;
    }
    let scaled: Vec<f64> = logits.iter().map(|l| l / temperature).collect();
    let p = masked_softmax(&scaled, mask.clone());
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = mask.start;
    for k in mask {
        if p[k] > 0.0 {
            last = k;
        }
        acc += p[k];
        if u < acc {
            return k;
        }
    }
    last
}

fn check_temperature(t: f64) -> Result<(), PolicyError> {
    if t.is_nan() || t < 0.0 {
        Err(PolicyError::BadTemperature(t))
    } else {
        Ok(())
    }
}

impl PolicyNet {
    /// No-thinking decode from a pre-encoded context.
    pub fn act_nothink_code(
        &self,
        code: &ContextCode,
        temperature: f64,
        seed: u64,
    ) -> Result<PolicyOutput, PolicyError> {
        check_temperature(temperature)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h0 = self.encode(code, Mode::NoThink);
        let value = self.value_of(&h0);
        let state = self.core_step(&h0, BOS);
        let logits = self.logits(&state);
        let dist = masked_softmax(&logits, ACTION_TOKENS);
        let tok = choose(&logits, ACTION_TOKENS, temperature, &mut rng);
        let first_action_dist = dist[ACTION_TOKENS].to_vec();
        let (entropy_raw, entropy_norm) = action_entropy(&first_action_dist)?;
        Ok(PolicyOutput {
            mode: Mode::NoThink,
            tokens: vec![tok],
            action: NavAction::from_id(tok).expect("action mask"),
            logprobs: vec![masked_logprob(&logits, ACTION_TOKENS, tok)],
            first_action_dist,
            entropy_raw,
            entropy_norm,
            value,
        })
    }

    /// Thinking decode from a pre-encoded context: up to `max_trace_len`
    /// reasoning tokens (stopping early at `EOT`), then one action token.
    pub fn act_think_code(
        &self,
        code: &ContextCode,
        max_trace_len: usize,
        temperature: f64,
        seed: u64,
    ) -> Result<PolicyOutput, PolicyError> {
        check_temperature(temperature)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h0 = self.encode(code, Mode::Think);
        let value = self.value_of(&h0);
        let mut state = h0;
        let mut input = BOS;
        let mut tokens = Vec::new();
        let mut logprobs = Vec::new();
        let mut reasoning = 0;
        loop {
            state = self.core_step(&state, input);
            let logits = self.logits(&state);
            if reasoning < max_trace_len {
                let tok = choose(&logits, REASONING_TOKENS, temperature, &mut rng);
                logprobs.push(masked_logprob(&logits, REASONING_TOKENS, tok));
                tokens.push(tok);
                input = tok;
                if tok == EOT {
                    reasoning = max_trace_len;
                } else {
                    reasoning += 1;
                }
                continue;
            }
            let dist = masked_softmax(&logits, ACTION_TOKENS);
            let tok = choose(&logits, ACTION_TOKENS, temperature, &mut rng);
            logprobs.push(masked_logprob(&logits, ACTION_TOKENS, tok));
            tokens.push(tok);
            let first_action_dist = dist[ACTION_TOKENS].to_vec();
            let (entropy_raw, entropy_norm) = action_entropy(&first_action_dist)?;
            return Ok(PolicyOutput {
                mode: Mode::Think,
                tokens,
                action: NavAction::from_id(tok).expect("action mask"),
                logprobs,
                first_action_dist,
                entropy_raw,
                entropy_norm,
                value,
            });
        }
    }

    /// Samples a single action token; `ctx.mode` must be `NoThink`.
    pub fn act_nothink(&self, ctx: &PolicyContext, temperature: f64, seed: u64) -> Result<PolicyOutput, PolicyError> {
        if ctx.mode != Mode::NoThink {
            return Err(PolicyError::ModeMismatch {
                expected: Mode::NoThink,
                got: ctx.mode,
            });
        }
        self.act_nothink_code(&self.encode_code(ctx)?, temperature, seed)
    }

    /// Samples a reasoning trace then an action; `ctx.mode` must be `Think`.
    pub fn act_think(
        &self,
        ctx: &PolicyContext,
        max_trace_len: usize,
        temperature: f64,
        seed: u64,
    ) -> Result<PolicyOutput, PolicyError> {
        if ctx.mode != Mode::Think {
            return Err(PolicyError::ModeMismatch {
                expected: Mode::Think,
                got: ctx.mode,
            });
        }
        self.act_think_code(&self.encode_code(ctx)?, max_trace_len, temperature, seed)
    }

    /// Re-scores `tokens` under `ctx`: per-token log-probabilities, the full
    /// (masked) distribution at every position and the value estimate.
    pub fn forward_logprobs(
        &self,
        ctx: &PolicyContext,
        tokens: &[usize],
    ) -> Result<(Vec<f64>, Vec<Vec<f64>>, f64), PolicyError> {
        check_tokens(ctx.mode, tokens)?;
        let code = self.encode_code(ctx)?;
        let cache = self.forward_seq(&code, ctx.mode, tokens);
        Ok((cache.logprobs, cache.probs, cache.value))
    }
}

/// Structural legality of a token sequence for a mode.
///
/// No-thinking: exactly one action token. Thinking: reasoning tokens, at most
/// one `EOT` (immediately before the action) and a final action token.
pub fn check_tokens(mode: Mode, tokens: &[usize]) -> Result<(), PolicyError> {
    let bad = |m: &str| Err(PolicyError::IllegalTokens(format!("{mode:?}: {m} in {tokens:?}")));
    let Some((&last, body)) = tokens.split_last() else {
        return bad("empty sequence");
    };
    if tokens.iter().any(|&t| t >= VOCAB_SIZE) {
        return bad("token id out of range");
    }
    if !is_action(last) {
        return bad("last token is not an action");
    }
    match mode {
        Mode::NoThink => {
            if !body.is_empty() {
                return bad("no-thinking output must be a single action");
            }
        }
        Mode::Think => {
            if body.iter().any(|&t| t < NUM_ACTIONS) {
                return bad("action token inside the trace");
            }
            if let Some(i) = body.iter().position(|&t| t == EOT) {
                if i + 1 != body.len() {
                    return bad("EOT before the end of the trace");
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::test_fixtures::{fixture_ctx, small_net};

    #[test]
    fn greedy_nothink_matches_argmax_and_logprob() {
        let net = small_net(1);
        let ctx = fixture_ctx(&net, 3, Mode::NoThink);
        let out = net.act_nothink(&ctx, 0.0, 9).unwrap();
        let (lp, dists, _) = net.forward_logprobs(&ctx, &out.tokens).unwrap();
        let d = &dists[0];
        let argmax = (0..5).fold(0, |b, k| if d[k] > d[b] { k } else { b });
        assert_eq!(out.tokens, vec![argmax]);
        assert!((out.logprobs[0] - d[argmax].ln()).abs() < 1e-12);
        assert!((lp[0] - out.logprobs[0]).abs() <= 1e-6);
        assert!(d[5..].iter().all(|&p| p == 0.0));
        let s: f64 = out.first_action_dist.iter().sum();
        assert!((s - 1.0).abs() < 1e-6);
    }

    #[test]
    fn sampling_is_seeded() {
        let net = small_net(2);
        let ctx = fixture_ctx(&net, 1, Mode::NoThink);
        for seed in 0..20 {
            let a = net.act_nothink(&ctx, 1.0, seed).unwrap();
            let b = net.act_nothink(&ctx, 1.0, seed).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn think_trace_is_capped_and_rescored() {
        let net = small_net(3);
        let ctx = fixture_ctx(&net, 2, Mode::Think);
        for seed in 0..1000 {
            let out = net.act_think(&ctx, 8, 1.0, seed).unwrap();
            check_tokens(Mode::Think, &out.tokens).unwrap();
            let reasoning = out.tokens.iter().filter(|&&t| t != EOT && !is_action(t)).count();
            assert!(reasoning <= 8);
            assert!(out.tokens.iter().filter(|&&t| t == EOT).count() <= 1);
            if seed % 100 == 0 {
                let (lp, dists, _) = net.forward_logprobs(&ctx, &out.tokens).unwrap();
                for (a, b) in lp.iter().zip(&out.logprobs) {
                    assert!((a - b).abs() <= 1e-6);
                }
                for d in dists {
                    assert!((d.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
                }
            }
        }
    }

    #[test]
    fn zero_trace_budget_goes_straight_to_action() {
        let net = small_net(4);
        let ctx = fixture_ctx(&net, 2, Mode::Think);
        let out = net.act_think(&ctx, 0, 1.0, 5).unwrap();
        assert_eq!(out.tokens.len(), 1);
        assert!(is_action(out.tokens[0]));
    }

    #[test]
    fn greedy_think_is_deterministic() {
        let net = small_net(5);
        let ctx = fixture_ctx(&net, 4, Mode::Think);
        let a = net.act_think(&ctx, 8, 0.0, 1).unwrap();
        let b = net.act_think(&ctx, 8, 0.0, 2).unwrap();
        assert_eq!(a.tokens, b.tokens);
    }

    #[test]
    fn mode_mismatch_and_illegal_tokens() {
        let net = small_net(6);
        let ctx = fixture_ctx(&net, 1, Mode::Think);
        assert!(matches!(
            net.act_nothink(&ctx, 0.0, 0),
            Err(PolicyError::ModeMismatch { .. })
        ));
        assert!(net.forward_logprobs(&ctx, &[EOT, 7, 0]).is_err());
        assert!(net.forward_logprobs(&ctx, &[7, 0, 1]).is_err());
        assert!(net.forward_logprobs(&ctx.with_mode(Mode::NoThink), &[7, 0]).is_err());
        assert!(net.forward_logprobs(&ctx, &[7, 8, EOT, 2]).is_ok());
    }

    #[test]
    fn greedy_decode_follows_rescored_argmax_everywhere() {
        let net = small_net(7);
        for inst in 0..4 {
            let ctx = fixture_ctx(&net, inst, Mode::Think);
            let out = net.act_think(&ctx, 8, 0.0, 0).unwrap();
            let (_, dists, _) = net.forward_logprobs(&ctx, &out.tokens).unwrap();
            for (tok, d) in out.tokens.iter().zip(&dists) {
                let best = (0..VOCAB_SIZE).fold(None::<usize>, |b, k| match b {
                    Some(b) if d[b] >= d[k] => Some(b),
                    _ if d[k] > 0.0 => Some(k),
                    b => b,
                });
                assert_eq!(Some(*tok), best);
            }
        }
    }
}
