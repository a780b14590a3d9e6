//! The two-mode token policy network and its reverse-mode gradients.
//!
//! Encoder: `h0 = tanh(enc_b + mode_emb[m] + instr_emb[I] + Σ obs_emb[slot, class]
//! + Σ act_emb[slot, class] + map_w^T f)`.
//!
//! Core: `h_{l+1} = tanh(rec_b + tok_emb[in_l] + rec_w h_l)` with `in_0 = BOS` and
//! `in_l = y_{l-1}`; position `l` emits `logits_l = out_w h_{l+1} + out_b`,
//! soft-maxed over the tokens legal at that position.
//!
//! Value: `v = val_w · h0 + val_b`.
//!
//! Parameters live in one flat `f64` buffer whose values are kept exactly
//! representable as `f32`, so checkpoints round-trip bit-exactly.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::context::{action_class, cell_class, Mode, PolicyContext, ACTION_CLASSES, CELL_CLASSES};
use super::vocab::{is_action, ACTION_TOKENS, BOS, REASONING_TOKENS, VOCAB_SIZE};
use super::PolicyError;
use crate::navsim::ViewGeometry;
use crate::semantic_map::MapFeatureConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub hidden: usize,
    /// Short-term memory size `w`.
    pub window: usize,
    pub view: ViewGeometry,
    pub num_categories: usize,
    pub map: MapFeatureConfig,
    pub init_seed: u64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            hidden: 128,
            window: 4,
            view: ViewGeometry::default(),
            num_categories: 12,
            map: MapFeatureConfig::default(),
            init_seed: 0,
        }
    }
}

impl PolicyConfig {
    pub fn map_features(&self) -> usize {
        self.map.len()
    }

    /// Parameter names and shapes in storage order.
    pub fn param_shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        let h = self.hidden;
        vec![
            ("obs_emb", vec![self.window * self.view.cells() * CELL_CLASSES, h]),
            ("act_emb", vec![self.window.saturating_sub(1) * ACTION_CLASSES, h]),
            ("instr_emb", vec![self.num_categories, h]),
            ("mode_emb", vec![2, h]),
            ("map_w", vec![self.map_features(), h]),
            ("enc_b", vec![h]),
            ("tok_emb", vec![VOCAB_SIZE + 1, h]),
            ("rec_w", vec![h, h]),
            ("rec_b", vec![h]),
            ("out_w", vec![VOCAB_SIZE, h]),
            ("out_b", vec![VOCAB_SIZE]),
            ("val_w", vec![h]),
            ("val_b", vec![1]),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layout {
    obs_emb: usize,
    act_emb: usize,
    instr_emb: usize,
    mode_emb: usize,
    map_w: usize,
    enc_b: usize,
    tok_emb: usize,
    rec_w: usize,
    rec_b: usize,
    out_w: usize,
    out_b: usize,
    val_w: usize,
    val_b: usize,
}

/// Gradient buffer laid out like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<f64>);

impl Gradients {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.0.iter_mut().for_each(|g| *g *= s);
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|g| g.is_finite())
    }
}

/// Context encoded to embedding row offsets plus dense map features; mode-free.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextCode {
    pub rows: Vec<usize>,
    pub dense: Vec<f64>,
}

/// Tokens legal at a decoding position.
pub fn position_mask(token: usize) -> Range<usize> {
    if is_action(token) {
        ACTION_TOKENS
    } else {
        REASONING_TOKENS
    }
}

/// Everything the backward pass needs from one teacher-forced sequence.
#[derive(Debug, Clone)]
pub struct SeqCache {
    pub code: ContextCode,
    pub mode: Mode,
    pub tokens: Vec<usize>,
    /// `h[0]` is the encoder state; `h[l + 1]` feeds position `l`.
    pub h: Vec<Vec<f64>>,
    /// Masked softmax per position (zeros outside the mask).
    pub probs: Vec<Vec<f64>>,
    pub masks: Vec<Range<usize>>,
    pub logprobs: Vec<f64>,
    pub value: f64,
}

impl SeqCache {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Upstream gradient for one sequence: per-position `dL/dlogits` and `dL/dvalue`.
#[derive(Debug, Clone)]
pub struct SeqGrad {
    pub dlogits: Vec<[f64; VOCAB_SIZE]>,
    pub dvalue: f64,
}

impl SeqGrad {
    pub fn zeros(len: usize) -> Self {
        Self {
            dlogits: vec![[0.0; VOCAB_SIZE]; len],
            dvalue: 0.0,
        }
    }

    /// Accumulates `coef * d log p(token at pos) / d logits`.
    pub fn add_logprob(&mut self, cache: &SeqCache, pos: usize, coef: f64) {
        let tok = cache.tokens[pos];
        let p = &cache.probs[pos];
        for k in cache.masks[pos].clone() {
            let ind = if k == tok { 1.0 } else { 0.0 };
            self.dlogits[pos][k] += coef * (ind - p[k]);
        }
    }

    /// Accumulates `coef * d KL(p || q) / d logits` at `pos`, where `p` is the
    /// cached distribution and `q` a fixed reference over the same mask.
    /// Returns the KL value.
    pub fn add_kl(&mut self, cache: &SeqCache, pos: usize, reference: &[f64], coef: f64) -> f64 {
        let p = &cache.probs[pos];
        let mask = cache.masks[pos].clone();
        let kl = categorical_kl(&p[mask.clone()], &reference[mask.clone()]);
        for k in mask {
            if p[k] > 0.0 {
                let g = p[k] * ((p[k].ln() - reference[k].ln()) - kl);
                self.dlogits[pos][k] += coef * g;
            }
        }
        kl
    }
}

/// `KL(p || q) = Σ p log(p / q)` with `0 log 0 = 0`.
pub fn categorical_kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi.ln() - qi.ln()))
        .sum()
}

/// A scalar loss assembled from per-sequence upstream gradients.
#[derive(Debug, Clone, Default)]
pub struct LossGraph {
    pub loss: f64,
    pub terms: Vec<(SeqCache, SeqGrad)>,
}

impl LossGraph {
    pub fn push(&mut self, cache: SeqCache, grad: SeqGrad) {
        self.terms.push((cache, grad));
    }
}

/// Masked softmax over `mask`; entries outside the mask are zero.
pub fn masked_softmax(logits: &[f64], mask: Range<usize>) -> Vec<f64> {
    let mut out = vec![0.0; logits.len()];
    let max = logits[mask.clone()].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for k in mask.clone() {
        let e = (logits[k] - max).exp();
        out[k] = e;
        z += e;
    }
    for k in mask {
        out[k] /= z;
    }
    out
}

/// Log of the masked softmax at `token`, computed stably.
pub fn masked_logprob(logits: &[f64], mask: Range<usize>, token: usize) -> f64 {
    let max = logits[mask.clone()].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + mask.map(|k| (logits[k] - max).exp()).sum::<f64>().ln();
    logits[token] - lse
}

fn round_f32(x: f64) -> f64 {
    x as f32 as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet {
    cfg: PolicyConfig,
    specs: Vec<ParamSpec>,
    layout: Layout,
    params: Vec<f64>,
}

impl PolicyNet {
    /// Randomly initialized network; deterministic in `cfg.init_seed`.
    pub fn new(cfg: PolicyConfig) -> Self {
        let mut net = Self::zeroed(cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(net.cfg.init_seed);
        let h = net.cfg.hidden as f64;
        let slots = (net.cfg.window * net.cfg.view.cells() + net.cfg.window.saturating_sub(1) + 1) as f64;
        let stds: Vec<(&str, f64)> = vec![
            ("obs_emb", 1.0 / slots.sqrt()),
            ("act_emb", 1.0 / slots.sqrt()),
            ("instr_emb", 1.0 / slots.sqrt()),
            ("mode_emb", 0.5),
            ("map_w", 0.05),
            ("enc_b", 0.0),
            ("tok_emb", 0.5),
            ("rec_w", 1.0 / h.sqrt()),
            ("rec_b", 0.0),
            ("out_w", 0.01),
            ("out_b", 0.0),
            ("val_w", 0.0),
            ("val_b", 0.0),
        ];
        for (name, std) in stds {
            if std == 0.0 {
                continue;
            }
            let spec = net.spec(name).expect("known parameter").clone();
            let normal = Normal::new(0.0, std).expect("positive std");
            for v in &mut net.params[spec.offset..spec.offset + spec.len] {
                *v = round_f32(normal.sample(&mut rng));
            }
        }
        net
    }

    pub fn zeroed(cfg: PolicyConfig) -> Self {
        let mut specs = Vec::new();
        let mut offset = 0;
        for (name, shape) in cfg.param_shapes() {
            let len = shape.iter().product();
            specs.push(ParamSpec {
                name: name.to_string(),
                shape,
                offset,
                len,
            });
            offset += len;
        }
        let off = |n: &str| specs.iter().find(|s| s.name == n).unwrap().offset;
        let layout = Layout {
            obs_emb: off("obs_emb"),
            act_emb: off("act_emb"),
            instr_emb: off("instr_emb"),
            mode_emb: off("mode_emb"),
            map_w: off("map_w"),
            enc_b: off("enc_b"),
            tok_emb: off("tok_emb"),
            rec_w: off("rec_w"),
            rec_b: off("rec_b"),
            out_w: off("out_w"),
            out_b: off("out_b"),
            val_w: off("val_w"),
            val_b: off("val_b"),
        };
        Self {
            cfg,
            specs,
            layout,
            params: vec![0.0; offset],
        }
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.cfg
    }

    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn spec(&self, name: &str) -> Option<&ParamSpec> {
        self.specs.iter().find(|s| s.name == name)
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable parameter access. Callers that store values should keep them
    /// `f32`-representable (see [`PolicyNet::round_params`]).
    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn round_params(&mut self) {
        self.params.iter_mut().for_each(|p| *p = round_f32(*p));
    }

    pub fn zero_grads(&self) -> Gradients {
        Gradients::zeros(self.params.len())
    }

    fn hidden(&self) -> usize {
        self.cfg.hidden
    }

    /// Encodes the mode-independent part of a context.
    pub fn encode_code(&self, ctx: &PolicyContext) -> Result<ContextCode, PolicyError> {
        let cfg = &self.cfg;
        let h = cfg.hidden;
        let cells = cfg.view.cells();
        if ctx.obs_window.len() != cfg.window || ctx.action_window.len() != cfg.window.saturating_sub(1) {
            return Err(PolicyError::BadContext(format!(
                "expected windows of {} observations and {} actions, got {} and {}",
                cfg.window,
                cfg.window.saturating_sub(1),
                ctx.obs_window.len(),
                ctx.action_window.len()
            )));
        }
        if ctx.map_feats.len() != cfg.map_features() {
            return Err(PolicyError::BadContext(format!(
                "expected {} map features, got {}",
                cfg.map_features(),
                ctx.map_feats.len()
            )));
        }
        if ctx.instruction as usize >= cfg.num_categories {
            return Err(PolicyError::BadContext(format!(
                "instruction {} out of range",
                ctx.instruction
            )));
        }
        let mut rows = Vec::with_capacity(cfg.window * cells + cfg.window + 1);
        for (k, slot) in ctx.obs_window.iter().enumerate() {
            for c in 0..cells {
                let cell = match slot {
                    Some(o) => {
                        if o.ego_view.len() != cells {
                            return Err(PolicyError::BadContext("observation geometry mismatch".into()));
                        }
                        Some(o.ego_view[c])
                    }
                    None => None,
                };
                let class = cell_class(cell, ctx.instruction);
                rows.push(self.layout.obs_emb + ((k * cells + c) * CELL_CLASSES + class) * h);
            }
        }
        for (k, a) in ctx.action_window.iter().enumerate() {
            rows.push(self.layout.act_emb + (k * ACTION_CLASSES + action_class(*a)) * h);
        }
        rows.push(self.layout.instr_emb + ctx.instruction as usize * h);
        Ok(ContextCode {
            rows,
            dense: ctx.map_feats.clone(),
        })
    }

    /// Encoder state `h0` for a code and mode.
    pub fn encode(&self, code: &ContextCode, mode: Mode) -> Vec<f64> {
        let h = self.hidden();
        let p = &self.params;
        let mut pre = p[self.layout.enc_b..self.layout.enc_b + h].to_vec();
        let m = self.layout.mode_emb + mode.index() * h;
        add_into(&mut pre, &p[m..m + h]);
        for &r in &code.rows {
            add_into(&mut pre, &p[r..r + h]);
        }
        for (i, &f) in code.dense.iter().enumerate() {
            if f != 0.0 {
                let r = self.layout.map_w + i * h;
                axpy(&mut pre, f, &p[r..r + h]);
            }
        }
        pre.iter_mut().for_each(|x| *x = x.tanh());
        pre
    }

    pub fn value_of(&self, h0: &[f64]) -> f64 {
        let h = self.hidden();
        dot(&self.params[self.layout.val_w..self.layout.val_w + h], h0) + self.params[self.layout.val_b]
    }

    /// One recurrent step.
    pub fn core_step(&self, prev: &[f64], input: usize) -> Vec<f64> {
        let h = self.hidden();
        let p = &self.params;
        let mut pre = p[self.layout.rec_b..self.layout.rec_b + h].to_vec();
        let t = self.layout.tok_emb + input * h;
        add_into(&mut pre, &p[t..t + h]);
        for (i, out) in pre.iter_mut().enumerate() {
            let w = self.layout.rec_w + i * h;
            *out += dot(&p[w..w + h], prev);
        }
        pre.iter_mut().for_each(|x| *x = x.tanh());
        pre
    }

    /// Full-vocabulary logits from a core state.
    pub fn logits(&self, state: &[f64]) -> [f64; VOCAB_SIZE] {
        let h = self.hidden();
        let p = &self.params;
        let mut out = [0.0; VOCAB_SIZE];
        for (k, o) in out.iter_mut().enumerate() {
            let w = self.layout.out_w + k * h;
            *o = dot(&p[w..w + h], state) + p[self.layout.out_b + k];
        }
        out
    }

    /// Teacher-forced pass over `tokens`, keeping what backward needs.
    pub fn forward_seq(&self, code: &ContextCode, mode: Mode, tokens: &[usize]) -> SeqCache {
        let h0 = self.encode(code, mode);
        let value = self.value_of(&h0);
        let mut hs = Vec::with_capacity(tokens.len() + 1);
        hs.push(h0);
        let mut probs = Vec::with_capacity(tokens.len());
        let mut masks = Vec::with_capacity(tokens.len());
        let mut logprobs = Vec::with_capacity(tokens.len());
        let mut input = BOS;
        for &tok in tokens {
            let next = self.core_step(hs.last().unwrap(), input);
            let logits = self.logits(&next);
            let mask = position_mask(tok);
            logprobs.push(masked_logprob(&logits, mask.clone(), tok));
            probs.push(masked_softmax(&logits, mask.clone()));
            masks.push(mask);
            hs.push(next);
            input = tok;
        }
        SeqCache {
            code: code.clone(),
            mode,
            tokens: tokens.to_vec(),
            h: hs,
            probs,
            masks,
            logprobs,
            value,
        }
    }

    /// Accumulates parameter gradients for one sequence into `grads`.
    pub fn backward_seq(&self, cache: &SeqCache, grad: &SeqGrad, grads: &mut Gradients) {
        let h = self.hidden();
        let p = &self.params;
        let g = &mut grads.0;
        let l = &self.layout;
        let mut dh_next = vec![0.0; h];
        for pos in (0..cache.tokens.len()).rev() {
            let state = &cache.h[pos + 1];
            let prev = &cache.h[pos];
            let dlog = &grad.dlogits[pos];
            let mut dh = dh_next.clone();
            for (k, &d) in dlog.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let w = l.out_w + k * h;
                axpy(&mut dh, d, &p[w..w + h]);
                axpy(&mut g[w..w + h], d, state);
                g[l.out_b + k] += d;
            }
            let dpre: Vec<f64> = dh.iter().zip(state).map(|(d, s)| d * (1.0 - s * s)).collect();
            let input = if pos == 0 { BOS } else { cache.tokens[pos - 1] };
            add_into(&mut g[l.rec_b..l.rec_b + h], &dpre);
            let t = l.tok_emb + input * h;
            add_into(&mut g[t..t + h], &dpre);
            let mut dprev = vec![0.0; h];
            for (i, &d) in dpre.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let w = l.rec_w + i * h;
                axpy(&mut g[w..w + h], d, prev);
                axpy(&mut dprev, d, &p[w..w + h]);
            }
            dh_next = dprev;
        }
        let h0 = &cache.h[0];
        let mut dh0 = dh_next;
        if grad.dvalue != 0.0 {
            axpy(&mut dh0, grad.dvalue, &p[l.val_w..l.val_w + h]);
            axpy(&mut g[l.val_w..l.val_w + h], grad.dvalue, h0);
            g[l.val_b] += grad.dvalue;
        }
        let dpre0: Vec<f64> = dh0.iter().zip(h0).map(|(d, s)| d * (1.0 - s * s)).collect();
        add_into(&mut g[l.enc_b..l.enc_b + h], &dpre0);
        let m = l.mode_emb + cache.mode.index() * h;
        add_into(&mut g[m..m + h], &dpre0);
        for &r in &cache.code.rows {
            add_into(&mut g[r..r + h], &dpre0);
        }
        for (i, &f) in cache.code.dense.iter().enumerate() {
            if f != 0.0 {
                let r = l.map_w + i * h;
                axpy(&mut g[r..r + h], f, &dpre0);
            }
        }
    }

    /// Gradient of a loss graph's scalar loss with respect to every parameter.
    pub fn backward(&self, graph: &LossGraph) -> Result<Gradients, PolicyError> {
        if !graph.loss.is_finite() {
            return Err(PolicyError::NonFiniteLoss(graph.loss));
        }
        let mut grads = self.zero_grads();
        for (cache, grad) in &graph.terms {
            self.backward_seq(cache, grad, &mut grads);
        }
        Ok(grads)
    }

    /// Builds a network from raw parameters (checkpoint loading).
    pub fn from_parts(cfg: PolicyConfig, params: Vec<f64>) -> Result<Self, PolicyError> {
        let mut net = Self::zeroed(cfg);
        if params.len() != net.params.len() {
            return Err(PolicyError::Checkpoint(format!(
                "expected {} parameters, got {}",
                net.params.len(),
                params.len()
            )));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(PolicyError::Checkpoint("non-finite parameter".into()));
        }
        net.params = params;
        Ok(net)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
fn add_into(y: &mut [f64], x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::test_fixtures::{fixture_ctx, small_net};
    use crate::policy::vocab::{DIR_LEFT, EOT, TGT_HIDDEN};
    use rand::seq::index::sample;
    use rand::Rng;

    struct Term {
        code: ContextCode,
        mode: Mode,
        tokens: Vec<usize>,
        coefs: Vec<f64>,
        kl_ref: Vec<Vec<f64>>,
        kl_coef: f64,
        vcoef: f64,
    }

    fn loss(net: &PolicyNet, terms: &[Term]) -> f64 {
        let mut total = 0.0;
        for t in terms {
            let c = net.forward_seq(&t.code, t.mode, &t.tokens);
            for (l, lp) in c.logprobs.iter().enumerate() {
                total += t.coefs[l] * lp;
                let m = c.masks[l].clone();
                total += t.kl_coef * categorical_kl(&c.probs[l][m.clone()], &t.kl_ref[l][m]);
            }
            total += t.vcoef * c.value;
        }
        total
    }

    fn graph(net: &PolicyNet, terms: &[Term]) -> LossGraph {
        let mut g = LossGraph::default();
        for t in terms {
            let c = net.forward_seq(&t.code, t.mode, &t.tokens);
            let mut sg = SeqGrad::zeros(c.len());
            for l in 0..c.len() {
                sg.add_logprob(&c, l, t.coefs[l]);
                sg.add_kl(&c, l, &t.kl_ref[l], t.kl_coef);
            }
            sg.dvalue = t.vcoef;
            g.push(c, sg);
        }
        g.loss = loss(net, terms);
        g
    }

    fn fixture_terms(net: &PolicyNet) -> Vec<Term> {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut terms = Vec::new();
        for (steps, mode, tokens) in [
            (2, Mode::Think, vec![TGT_HIDDEN, DIR_LEFT, EOT, 2]),
            (3, Mode::NoThink, vec![0]),
            (1, Mode::Think, vec![TGT_HIDDEN, 15, 13, 7, EOT, 4]),
        ] {
            let ctx = fixture_ctx(net, steps, mode);
            let code = net.encode_code(&ctx).unwrap();
            let kl_ref = tokens
                .iter()
                .map(|&t| {
                    let mask = position_mask(t);
                    let raw: Vec<f64> = (0..VOCAB_SIZE).map(|_| rng.random::<f64>() * 3.0).collect();
                    masked_softmax(&raw, mask)
                })
                .collect();
            terms.push(Term {
                code,
                mode,
                coefs: tokens.iter().map(|_| rng.random::<f64>() * 2.0 - 1.0).collect(),
                tokens,
                kl_ref,
                kl_coef: 0.3,
                vcoef: 0.7,
            });
        }
        terms
    }

    #[test]
    fn zero_weighted_loss_gives_zero_gradients() {
        let net = small_net(1);
        let mut terms = fixture_terms(&net);
        for t in &mut terms {
            t.coefs.iter_mut().for_each(|c| *c = 0.0);
            t.kl_coef = 0.0;
            t.vcoef = 0.0;
        }
        let g = net.backward(&graph(&net, &terms)).unwrap();
        assert!(g.0.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn non_finite_loss_is_rejected() {
        let net = small_net(1);
        let g = LossGraph {
            loss: f64::NAN,
            terms: vec![],
        };
        assert!(matches!(net.backward(&g), Err(PolicyError::NonFiniteLoss(_))));
    }

    #[test]
    fn gradients_match_central_differences() {
        let mut net = small_net(2);
        // nonzero value head so the value path is exercised too
        let vw = net.spec("val_w").unwrap().clone();
        for (i, v) in net.params_mut()[vw.offset..vw.offset + vw.len].iter_mut().enumerate() {
            *v = ((i as f64) * 0.37).sin() * 0.3;
        }
        let terms = fixture_terms(&net);
        let analytic = net.backward(&graph(&net, &terms)).unwrap();
        let again = net.backward(&graph(&net, &terms)).unwrap();
        assert_eq!(analytic, again);
        let nonzero: Vec<usize> = (0..analytic.0.len()).filter(|&i| analytic.0[i] != 0.0).collect();
        let zero: Vec<usize> = (0..analytic.0.len()).filter(|&i| analytic.0[i] == 0.0).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut picks: Vec<usize> = sample(&mut rng, nonzero.len(), 1000.min(nonzero.len()))
            .into_iter()
            .map(|k| nonzero[k])
            .collect();
        picks.extend(sample(&mut rng, zero.len(), 200).into_iter().map(|k| zero[k]));
        let h = 1e-4;
        let mut worst = 0.0f64;
        for &i in &picks {
            let orig = net.params()[i];
            net.params_mut()[i] = orig + h;
            let up = loss(&net, &terms);
            net.params_mut()[i] = orig - h;
            let down = loss(&net, &terms);
            net.params_mut()[i] = orig;
            let fd = (up - down) / (2.0 * h);
            let a = analytic.0[i];
            let scale = a.abs().max(fd.abs());
            if scale > 1e-6 {
                worst = worst.max((a - fd).abs() / scale);
            } else {
                assert!((a - fd).abs() < 1e-9, "param {i}: {a} vs {fd}");
            }
        }
        assert!(worst <= 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn logit_row_gradient_is_indicator_minus_softmax() {
        let net = small_net(3);
        let ctx = fixture_ctx(&net, 2, Mode::Think);
        let code = net.encode_code(&ctx).unwrap();
        let tokens = vec![TGT_HIDDEN, DIR_LEFT, EOT, 3];
        let cache = net.forward_seq(&code, Mode::Think, &tokens);
        let h = net.config().hidden;
        let ob = net.spec("out_b").unwrap().offset;
        let ow = net.spec("out_w").unwrap().offset;
        for pos in 0..tokens.len() {
            let mut sg = SeqGrad::zeros(tokens.len());
            sg.add_logprob(&cache, pos, 1.0);
            let mut g = LossGraph::default();
            g.loss = cache.logprobs[pos];
            g.push(cache.clone(), sg);
            let grads = net.backward(&g).unwrap();
            let state = &cache.h[pos + 1];
            for k in 0..VOCAB_SIZE {
                let ind = if k == tokens[pos] { 1.0 } else { 0.0 };
                let expect = if cache.masks[pos].contains(&k) {
                    ind - cache.probs[pos][k]
                } else {
                    0.0
                };
                assert!((grads.0[ob + k] - expect).abs() < 1e-12);
                for j in 0..h {
                    assert!((grads.0[ow + k * h + j] - expect * state[j]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn mode_changes_the_encoding() {
        let net = small_net(4);
        let ctx = fixture_ctx(&net, 1, Mode::NoThink);
        let code = net.encode_code(&ctx).unwrap();
        assert_eq!(net.encode(&code, Mode::NoThink), net.encode(&code, Mode::NoThink));
        assert_ne!(net.encode(&code, Mode::NoThink), net.encode(&code, Mode::Think));
        let early = fixture_ctx(&net, 0, Mode::NoThink);
        assert!(net
            .encode(&net.encode_code(&early).unwrap(), Mode::NoThink)
            .iter()
            .all(|x| x.is_finite()));
    }

    #[test]
    fn default_size_is_reasonable() {
        let net = PolicyNet::new(PolicyConfig::default());
        assert!(net.num_params() > 10_000 && net.num_params() < 1_000_000);
        assert!(net.params().iter().all(|p| p.is_finite() && (*p as f32 as f64) == *p));
    }
}
