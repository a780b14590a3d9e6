//! Run configuration: line-based `key = value` files with dotted section keys.
//!
//! ```text
//! # comment
//! seed = 3
//! gate.tau = 0.6
//! eval.sweep_taus = [0.0, 0.2, 0.4]
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::gate::{Corruption, EpisodeOptions, GateConfig, Strategy};
use crate::navsim::{EnvConfig, GenParams, ViewGeometry};
use crate::policy::PolicyConfig;
use crate::semantic_map::MapFeatureConfig;
use crate::trainer::{CollectConfig, PpoConfig, SftConfig, SftPipelineConfig, TwoStageConfig};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("{}`{key}`: {msg}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Range {
        line: Option<usize>,
        key: String,
        msg: String,
    },
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSection {
    /// Training / rollout horizon.
    pub max_steps: u32,
    pub eval_max_steps: u32,
    pub success_radius: u32,
    pub view_depth: usize,
    pub view_width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    pub hidden: usize,
    pub window: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub n_steps: usize,
    pub explore: f64,
    /// Upper bound on houses visited while collecting.
    pub max_houses: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SftSection {
    pub bootstrap_epochs: usize,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub max_grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotateSection {
    pub top_fraction: f64,
    pub noise: f64,
    pub max_attempts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RlSection {
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub beta: f64,
    pub rollout_episodes: usize,
    pub minibatch: usize,
    pub lr: f64,
    pub epochs: usize,
    pub updates_per_stage: usize,
    pub value_coef: f64,
    pub value_scale: f64,
    pub max_grad_norm: f64,
    pub normalize_advantages: bool,
    pub temperature: f64,
    pub train_houses: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateSection {
    pub tau: f64,
    pub k: u32,
    pub max_trace_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub tasks: usize,
    pub temperature: f64,
    /// Discount for Monte-Carlo Q estimates.
    pub q_gamma: f64,
    pub pass_k_samples: usize,
    /// Sampling temperature for the repeated pass@k runs.
    pub pass_k_temperature: f64,
    pub pass_k_tasks: usize,
    pub pass_ks: Vec<usize>,
    pub sweep_taus: Vec<f64>,
    pub sweep_ntw: Vec<u32>,
    pub p_drop: f64,
    pub p_mislabel: f64,
    pub robustness_grid: Vec<[f64; 2]>,
    /// Shortest-path length bucket edges for difficulty strata.
    pub strata_edges: [u32; 2],
}

/// Every tunable of the pipeline. Field order is the order of the resolved file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: String,
    /// Parallel episode workers; 0 uses every core.
    pub workers: usize,
    pub house: GenParams,
    pub env: EnvSection,
    pub map: MapFeatureConfig,
    pub policy: PolicySection,
    pub data: DataSection,
    pub sft: SftSection,
    pub annotate: AnnotateSection,
    pub rl: RlSection,
    pub gate: GateSection,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        let ppo = PpoConfig::default();
        let sft = SftConfig::default();
        let env = EnvConfig::default();
        Self {
            seed: 0,
            out: "runs".into(),
            workers: 0,
            house: GenParams::default(),
            env: EnvSection {
                max_steps: env.max_steps,
                eval_max_steps: EnvConfig::evaluation().max_steps,
                success_radius: env.success_radius,
                view_depth: env.view.depth,
                view_width: env.view.width,
            },
            map: MapFeatureConfig::default(),
            policy: PolicySection { hidden: 128, window: 4 },
            data: DataSection {
                n_steps: 50_000,
                explore: 0.1,
                max_houses: 100_000,
            },
            sft: SftSection {
                bootstrap_epochs: sft.epochs,
                epochs: sft.epochs,
                batch: sft.batch,
                lr: sft.lr,
                max_grad_norm: sft.max_grad_norm,
            },
            annotate: AnnotateSection {
                top_fraction: 0.2,
                noise: 0.1,
                max_attempts: 8,
            },
            rl: RlSection {
                gamma: ppo.gamma,
                lambda: ppo.lambda,
                clip: ppo.clip,
                beta: ppo.beta,
                rollout_episodes: ppo.rollout_episodes,
                minibatch: ppo.minibatch,
                lr: ppo.lr,
                epochs: ppo.epochs,
                updates_per_stage: ppo.updates_per_stage,
                value_coef: ppo.value_coef,
                value_scale: ppo.value_scale,
                max_grad_norm: ppo.max_grad_norm,
                normalize_advantages: ppo.normalize_advantages,
                temperature: ppo.temperature,
                train_houses: 200,
            },
            gate: GateSection {
                tau: 0.6,
                k: 5,
                max_trace_len: 8,
            },
            eval: EvalSection {
                tasks: 200,
                temperature: 1.0,
                q_gamma: 0.99,
                pass_k_samples: 16,
                pass_k_temperature: 0.2,
                pass_k_tasks: 50,
                pass_ks: vec![1, 2, 4, 8, 16],
                sweep_taus: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
                sweep_ntw: vec![1, 2, 3, 5, 8, 10],
                p_drop: 0.3,
                p_mislabel: 0.1,
                robustness_grid: vec![[0.0, 0.0], [0.1, 0.0], [0.3, 0.0], [0.3, 0.1], [0.5, 0.2]],
                strata_edges: [10, 25],
            },
        }
    }
}

/// Leaf keys in file order, for the resolved dump and error messages.
fn leaves(prefix: &str, v: &Value, out: &mut Vec<(String, Value)>) {
    match v {
        Value::Object(m) => {
            for (k, child) in m {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                leaves(&key, child, out);
            }
        }
        _ => out.push((prefix.to_string(), v.clone())),
    }
}

fn to_value(cfg: &RunConfig) -> Value {
    serde_json::to_value(cfg).expect("RunConfig serializes")
}

fn parse_scalar(raw: &str, like: &Value) -> Result<Value, String> {
    let raw = raw.trim();
    match like {
        Value::Bool(_) => raw
            .parse::<bool>()
            .map(Value::Bool)
            .map_err(|_| format!("expected true or false, got `{raw}`")),
        Value::Number(n) if n.is_u64() => raw
            .parse::<u64>()
            .map(Value::from)
            .map_err(|_| format!("expected a non-negative integer, got `{raw}`")),
        Value::Number(n) if n.is_i64() => raw
            .parse::<i64>()
            .map(Value::from)
            .map_err(|_| format!("expected an integer, got `{raw}`")),
        Value::Number(_) => {
            let x: f64 = raw.parse().map_err(|_| format!("expected a number, got `{raw}`"))?;
            serde_json::Number::from_f64(x)
                .map(Value::Number)
                .ok_or_else(|| format!("`{raw}` is not finite"))
        }
        Value::String(_) => Ok(Value::String(
            raw.strip_prefix('"')
                .and_then(|s| s.strip_suffix('"'))
                .unwrap_or(raw)
                .to_string(),
        )),
        Value::Array(_) => serde_json::from_str::<Value>(raw)
            .ok()
            .filter(Value::is_array)
            .ok_or_else(|| format!("expected a list like [1, 2], got `{raw}`")),
        _ => Err("unsupported value".into()),
    }
}

fn set_path(root: &mut Value, key: &str, line: usize, raw: &str) -> Result<(), ConfigError> {
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, p) in parts.iter().enumerate() {
        let obj: &mut Map<String, Value> = match cur {
            Value::Object(m) => m,
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        };
        let Some(next) = obj.get_mut(*p) else {
            return Err(ConfigError::UnknownKey {
                line,
                key: key.to_string(),
            });
        };
        if i + 1 == parts.len() {
            if next.is_object() {
                return Err(ConfigError::Syntax {
                    line,
                    msg: format!("`{key}` is a section, not a value"),
                });
            }
            *next = parse_scalar(raw, next).map_err(|msg| ConfigError::Range {
                line: Some(line),
                key: key.to_string(),
                msg,
            })?;
            return Ok(());
        }
        cur = next;
    }
    unreachable!("split yields at least one part")
}

/// A parsed config together with where each key was set.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub config: RunConfig,
    pub lines: BTreeMap<String, usize>,
}

impl RunConfig {
    /// Parses `text` over the defaults, then applies `overrides` (`key=value`),
    /// which win over the file.
    pub fn parse_with(text: &str, overrides: &[String]) -> Result<Resolved, ConfigError> {
        let mut root = to_value(&RunConfig::default());
        let mut lines = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((k, v)) = body.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: n,
                    msg: format!("expected `key = value`, got `{body}`"),
                });
            };
            let k = k.trim();
            if lines.insert(k.to_string(), n).is_some() {
                return Err(ConfigError::Syntax {
                    line: n,
                    msg: format!("`{k}` set twice"),
                });
            }
            set_path(&mut root, k, n, v)?;
        }
        for o in overrides {
            let Some((k, v)) = o.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: 0,
                    msg: format!("override `{o}` is not key=value"),
                });
            };
            set_path(&mut root, k.trim(), 0, v)?;
            lines.insert(k.trim().to_string(), 0);
        }
        let config: RunConfig = serde_json::from_value(root).map_err(|e| ConfigError::Syntax {
            line: 0,
            msg: e.to_string(),
        })?;
        let line_of = |k: &str| lines.get(k).copied().filter(|&l| l > 0);
        if let Some((key, msg)) = config.violations().into_iter().next() {
            return Err(ConfigError::Range {
                line: line_of(&key),
                key,
                msg,
            });
        }
        Ok(Resolved { config, lines })
    }

    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        Ok(Self::parse_with(text, &[])?.config)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        Ok(Self::parse_with(&text, overrides)?.config)
    }

    /// Out-of-range values as `(key, message)`, in key order.
    pub fn violations(&self) -> Vec<(String, String)> {
        let mut v = Vec::new();
        let mut check = |ok: bool, key: &str, msg: &str| {
            if !ok {
                v.push((key.to_string(), msg.to_string()));
            }
        };
        let prob = |x: f64| (0.0..=1.0).contains(&x);
        let h = &self.house;
        check(
            h.width >= 8 && h.height >= 8,
            "house.width",
            "houses must be at least 8x8",
        );
        check(
            h.rooms_min >= 1 && h.rooms_min <= h.rooms_max,
            "house.rooms_min",
            "need 1 <= rooms_min <= rooms_max",
        );
        check(prob(h.object_density), "house.object_density", "must lie in [0, 1]");
        check(
            h.num_categories >= 2,
            "house.num_categories",
            "need at least 2 categories",
        );
        check(
            prob(h.landmark_fraction),
            "house.landmark_fraction",
            "must lie in [0, 1]",
        );
        check(self.env.max_steps > 0, "env.max_steps", "must be positive");
        check(self.env.eval_max_steps > 0, "env.eval_max_steps", "must be positive");
        check(self.env.view_depth > 0, "env.view_depth", "must be positive");
        check(self.env.view_width % 2 == 1, "env.view_width", "must be odd");
        check(
            self.map.grid > 0 && self.map.grid % 2 == 0,
            "map.grid",
            "must be even and positive",
        );
        check(
            self.map.radius > 0 && (2 * self.map.radius) as usize % self.map.grid.max(1) == 0,
            "map.radius",
            "2 * radius must be a positive multiple of map.grid",
        );
        check(self.policy.hidden > 0, "policy.hidden", "must be positive");
        check(self.policy.window > 0, "policy.window", "must be positive");
        check(self.data.n_steps > 0, "data.n_steps", "must be positive");
        check(
            prob(self.data.explore) && self.data.explore < 1.0,
            "data.explore",
            "must lie in [0, 1)",
        );
        check(self.sft.batch > 0, "sft.batch", "must be positive");
        check(self.sft.lr >= 0.0, "sft.lr", "must be non-negative");
        check(
            self.sft.max_grad_norm >= 0.0,
            "sft.max_grad_norm",
            "must be non-negative",
        );
        check(
            self.annotate.top_fraction > 0.0 && self.annotate.top_fraction <= 1.0,
            "annotate.top_fraction",
            "must lie in (0, 1]",
        );
        check(prob(self.annotate.noise), "annotate.noise", "must lie in [0, 1]");
        check(
            self.annotate.max_attempts > 0,
            "annotate.max_attempts",
            "must be positive",
        );
        let r = &self.rl;
        check(r.gamma > 0.0 && r.gamma <= 1.0, "rl.gamma", "must lie in (0, 1]");
        check(prob(r.lambda), "rl.lambda", "must lie in [0, 1]");
        check(r.clip > 0.0 && r.clip < 1.0, "rl.clip", "must lie in (0, 1)");
        check(r.beta >= 0.0, "rl.beta", "must be non-negative");
        check(r.rollout_episodes > 0, "rl.rollout_episodes", "must be positive");
        check(r.minibatch > 0, "rl.minibatch", "must be positive");
        check(r.lr >= 0.0, "rl.lr", "must be non-negative");
        check(r.epochs > 0, "rl.epochs", "must be positive");
        check(r.value_coef >= 0.0, "rl.value_coef", "must be non-negative");
        check(r.value_scale > 0.0, "rl.value_scale", "must be positive");
        check(r.max_grad_norm >= 0.0, "rl.max_grad_norm", "must be non-negative");
        check(
            r.temperature > 0.0,
            "rl.temperature",
            "rollouts must sample (temperature > 0)",
        );
        check(r.train_houses > 0, "rl.train_houses", "must be positive");
        check(
            prob(self.gate.tau),
            "gate.tau",
            "must lie in [0, 1] (normalized entropy)",
        );
        check(self.gate.max_trace_len > 0, "gate.max_trace_len", "must be positive");
        let e = &self.eval;
        check(e.tasks > 0, "eval.tasks", "must be positive");
        check(e.temperature >= 0.0, "eval.temperature", "must be non-negative");
        check(
            e.q_gamma > 0.0 && e.q_gamma <= 1.0,
            "eval.q_gamma",
            "must lie in (0, 1]",
        );
        check(e.pass_k_samples > 0, "eval.pass_k_samples", "must be positive");
        check(
            e.pass_k_temperature > 0.0,
            "eval.pass_k_temperature",
            "repeated runs must sample (temperature > 0)",
        );
        check(
            e.pass_ks.iter().all(|&k| k >= 1 && k <= e.pass_k_samples),
            "eval.pass_ks",
            "every k must lie in [1, pass_k_samples]",
        );
        check(
            e.sweep_taus.windows(2).all(|w| w[0] < w[1]) && e.sweep_taus.iter().all(|&t| prob(t)),
            "eval.sweep_taus",
            "must be strictly increasing values in [0, 1]",
        );
        check(prob(e.p_drop), "eval.p_drop", "must lie in [0, 1]");
        check(prob(e.p_mislabel), "eval.p_mislabel", "must lie in [0, 1]");
        check(
            e.robustness_grid.iter().all(|p| prob(p[0]) && prob(p[1])),
            "eval.robustness_grid",
            "probabilities must lie in [0, 1]",
        );
        check(
            e.strata_edges[0] < e.strata_edges[1],
            "eval.strata_edges",
            "edges must increase",
        );
        v
    }

    /// The resolved file: every key with its value, one per line.
    pub fn to_text(&self) -> String {
        let mut out = Vec::new();
        leaves("", &to_value(self), &mut out);
        let mut s = String::new();
        for (k, v) in out {
            let text = match &v {
                Value::String(x) => format!("\"{x}\""),
                other => other.to_string(),
            };
            let _ = writeln!(s, "{k} = {text}");
        }
        s
    }

    /// Short hex digest of the resolved text.
    pub fn hash(&self) -> String {
        hex::encode(&Sha256::digest(self.to_text().as_bytes())[..6])
    }

    pub fn gen_params(&self) -> GenParams {
        self.house.clone()
    }

    fn view(&self) -> ViewGeometry {
        ViewGeometry {
            depth: self.env.view_depth,
            width: self.env.view_width,
        }
    }

    pub fn train_env(&self) -> EnvConfig {
        EnvConfig {
            max_steps: self.env.max_steps,
            success_radius: self.env.success_radius,
            view: self.view(),
        }
    }

    pub fn eval_env(&self) -> EnvConfig {
        EnvConfig {
            max_steps: self.env.eval_max_steps,
            ..self.train_env()
        }
    }

    pub fn policy_config(&self) -> PolicyConfig {
        PolicyConfig {
            hidden: self.policy.hidden,
            window: self.policy.window,
            view: self.view(),
            num_categories: self.house.num_categories,
            map: self.map,
            init_seed: 0,
        }
    }

    pub fn collect_config(&self) -> CollectConfig {
        CollectConfig {
            n_steps: self.data.n_steps,
            gen: self.gen_params(),
            env: self.train_env(),
            window: self.policy.window,
            map: self.map,
            explore: self.data.explore,
            seed: crate::seeds::derive_named(self.seed, "collect"),
        }
    }

    pub fn sft_pipeline(&self) -> SftPipelineConfig {
        let base = SftConfig {
            epochs: self.sft.epochs,
            batch: self.sft.batch,
            lr: self.sft.lr,
            max_grad_norm: self.sft.max_grad_norm,
            seed: 0,
        };
        SftPipelineConfig {
            policy: self.policy_config(),
            bootstrap: SftConfig {
                epochs: self.sft.bootstrap_epochs,
                ..base.clone()
            },
            hsft: base,
            top_fraction: self.annotate.top_fraction,
            annotator_noise: self.annotate.noise,
            max_attempts: self.annotate.max_attempts,
            seed: self.seed,
        }
    }

    pub fn ppo(&self) -> PpoConfig {
        let r = &self.rl;
        PpoConfig {
            gamma: r.gamma,
            lambda: r.lambda,
            clip: r.clip,
            beta: r.beta,
            rollout_episodes: r.rollout_episodes,
            minibatch: r.minibatch,
            lr: r.lr,
            epochs: r.epochs,
            updates_per_stage: r.updates_per_stage,
            value_coef: r.value_coef,
            value_scale: r.value_scale,
            max_grad_norm: r.max_grad_norm,
            normalize_advantages: r.normalize_advantages,
            temperature: r.temperature,
        }
    }

    pub fn hybrid_gate(&self) -> GateConfig {
        GateConfig {
            strategy: Strategy::Hybrid {
                tau: self.gate.tau,
                k: self.gate.k,
            },
            max_trace_len: self.gate.max_trace_len,
        }
    }

    pub fn gate_for(&self, strategy: Strategy) -> GateConfig {
        GateConfig {
            strategy,
            max_trace_len: self.gate.max_trace_len,
        }
    }

    pub fn two_stage(&self) -> TwoStageConfig {
        TwoStageConfig {
            ppo: self.ppo(),
            gate: self.hybrid_gate(),
            env: self.train_env(),
            seed: crate::seeds::derive_named(self.seed, "rl"),
        }
    }

    pub fn eval_options(&self) -> EpisodeOptions {
        EpisodeOptions {
            env: self.eval_env(),
            temperature: self.eval.temperature,
            corruption: None,
            keep_transitions: false,
        }
    }

    pub fn corruption(&self) -> Corruption {
        Corruption {
            p_drop: self.eval.p_drop,
            p_mislabel: self.eval.p_mislabel,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_defaults() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
        assert_eq!(RunConfig::parse("# only a comment\n\n").unwrap(), RunConfig::default());
    }

    #[test]
    fn defaults_are_valid() {
        assert!(RunConfig::default().violations().is_empty());
    }

    #[test]
    fn resolved_text_round_trips() {
        let cfg = RunConfig::parse("seed = 9\ngate.tau = 0.4\neval.sweep_taus = [0.1, 0.5]\nout = \"x y\"").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.eval.sweep_taus, vec![0.1, 0.5]);
        assert_eq!(cfg.out, "x y");
        let again = RunConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.to_text(), cfg.to_text());
        assert_eq!(
            RunConfig::parse(&RunConfig::default().to_text()).unwrap(),
            RunConfig::default()
        );
    }

    #[test]
    fn tau_above_one_names_the_key_and_line() {
        let err = RunConfig::parse("seed = 1\ngate.tau = 1.5\n").unwrap_err();
        match &err {
            ConfigError::Range { line, key, .. } => {
                assert_eq!(*line, Some(2));
                assert_eq!(key, "gate.tau");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("gate.tau"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert_eq!(
            RunConfig::parse("seed = 1\n\ngate.theta = 2\n").unwrap_err(),
            ConfigError::UnknownKey {
                line: 3,
                key: "gate.theta".into()
            }
        );
        assert!(matches!(
            RunConfig::parse("nope = 1"),
            Err(ConfigError::UnknownKey { line: 1, .. })
        ));
        assert!(matches!(
            RunConfig::parse("gate = 1"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
    }

    #[test]
    fn type_errors_are_line_precise() {
        assert!(matches!(
            RunConfig::parse("\nrl.epochs = 2.5"),
            Err(ConfigError::Range { line: Some(2), .. })
        ));
        assert!(matches!(
            RunConfig::parse("rl.normalize_advantages = yes"),
            Err(ConfigError::Range { line: Some(1), .. })
        ));
        assert!(matches!(
            RunConfig::parse("seed 3"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            RunConfig::parse("seed = 1\nseed = 2"),
            Err(ConfigError::Syntax { line: 2, .. })
        ));
    }

    #[test]
    fn overrides_win() {
        let r = RunConfig::parse_with("gate.tau = 0.2", &["gate.tau=0.7".into(), "seed=4".into()]).unwrap();
        assert_eq!(r.config.gate.tau, 0.7);
        assert_eq!(r.config.seed, 4);
        assert!(RunConfig::parse_with("", &["gate.tau=2".into()]).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.seed = 1;
        assert_eq!(a.hash(), RunConfig::default().hash());
        assert_ne!(a.hash(), b.hash());
    }
}
