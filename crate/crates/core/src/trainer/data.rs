//! Expert data, entropy filtering and reasoning-trace annotation.

use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::TrainerError;
use crate::navsim::{expert_action, generate_house, EnvConfig, EpisodeState, GenParams, NavAction};
use crate::policy::vocab::{
    distance_bucket, implied_action, Family, DIR_AHEAD, DIR_BEHIND, DIR_LEFT, DIR_RIGHT, EOT, FRONTIER_AHEAD,
    FRONTIER_LEFT, FRONTIER_NONE, FRONTIER_RIGHT, TGT_HIDDEN, TGT_VISIBLE,
};
use crate::policy::{History, Mode, PolicyContext, PolicyNet};
use crate::seeds;
use crate::semantic_map::{map_features, AnnotatedMap, MapFeatureConfig};

/// Ground-truth reasoning tokens for a state, in trace order:
/// visibility, distance bucket, frontier direction, direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrueTrace(pub [usize; 4]);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertSample {
    pub id: u64,
    pub house_seed: u64,
    pub step: u32,
    pub context: PolicyContext,
    pub target_tokens: Vec<usize>,
    pub expert_action: NavAction,
    /// Privileged annotator input.
    pub true_trace: TrueTrace,
    /// Reflexive normalized entropy under the bootstrap model, once scored.
    pub source_entropy: Option<f64>,
}

impl ExpertSample {
    pub fn mode(&self) -> Mode {
        self.context.mode
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub house_seeds: Vec<u64>,
    pub n_steps: usize,
    pub top_fraction: Option<f64>,
    pub annotator_noise: Option<f64>,
    pub max_attempts: Option<usize>,
    pub annotation_seed: Option<u64>,
    pub discarded: usize,
    pub skipped_houses: Vec<u64>,
    pub explore: f64,
}

/// Expert-data collection settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectConfig {
    pub n_steps: usize,
    pub gen: GenParams,
    pub env: EnvConfig,
    pub window: usize,
    pub map: MapFeatureConfig,
    /// Per-step probability of executing a random motion instead of the
    /// expert's action. Labels are always the expert's action.
    pub explore: f64,
    pub seed: u64,
}

impl Default for CollectConfig {
    fn default() -> Self {
        Self {
            n_steps: 50_000,
            gen: GenParams::default(),
            env: EnvConfig::default(),
            window: 4,
            map: MapFeatureConfig::default(),
            explore: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HybridDataset {
    pub nrd: Vec<ExpertSample>,
    pub rd: Vec<ExpertSample>,
    pub meta: DatasetMeta,
}

impl HybridDataset {
    pub fn all(&self) -> impl Iterator<Item = &ExpertSample> {
        self.nrd.iter().chain(&self.rd)
    }

    pub fn len(&self) -> usize {
        self.nrd.len() + self.rd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Direction token for an expert action.
pub fn direction_token(a: NavAction) -> usize {
    match a {
        NavAction::MoveAhead | NavAction::End => DIR_AHEAD,
        NavAction::RotateLeft => DIR_LEFT,
        NavAction::RotateRight => DIR_RIGHT,
        NavAction::MoveBack => DIR_BEHIND,
    }
}

fn frontier_token(map: &AnnotatedMap) -> usize {
    let (Some(f), Some(pose)) = (map.nearest_frontier(), map.current_pose) else {
        return FRONTIER_NONE;
    };
    let (fwd, right) = pose.world_to_ego(f);
    if fwd >= right.abs() {
        FRONTIER_AHEAD
    } else if right > 0 {
        FRONTIER_RIGHT
    } else {
        FRONTIER_LEFT
    }
}

const MOTIONS: [NavAction; 4] = [
    NavAction::MoveAhead,
    NavAction::MoveBack,
    NavAction::RotateLeft,
    NavAction::RotateRight,
];

/// Rolls the privileged expert through consecutive houses from `house_seeds`
/// until exactly `cfg.n_steps` reflexive samples are gathered. With
/// `cfg.explore > 0` the executed action is sometimes a random motion, which
/// puts off-path states (collisions included) into the data.
pub fn collect_expert_dataset(house_seeds: &[u64], cfg: &CollectConfig) -> Result<HybridDataset, TrainerError> {
    let n_steps = cfg.n_steps;
    let params = &cfg.gen;
    let mut ds = HybridDataset {
        meta: DatasetMeta {
            n_steps,
            explore: cfg.explore,
            ..DatasetMeta::default()
        },
        ..HybridDataset::default()
    };
    for &hs in house_seeds {
        if ds.nrd.len() >= n_steps {
            break;
        }
        let house = match generate_house(hs, params) {
            Ok(h) => Arc::new(h),
            Err(e) => {
                warn!("skipping house {hs}: {e}");
                ds.meta.skipped_houses.push(hs);
                continue;
            }
        };
        ds.meta.house_seeds.push(hs);
        let (mut state, obs0) = EpisodeState::reset(house.clone(), cfg.env);
        let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(cfg.seed, hs));
        let mut map = AnnotatedMap::new(house.width, house.height, params.num_categories, house.target_category);
        map.update(state.pose(), &obs0)?;
        let mut hist = History::new(cfg.window, obs0);
        while !state.done() && ds.nrd.len() < n_steps {
            let action = match expert_action(&state) {
                Ok(a) => a,
                Err(e) => {
                    warn!("house {hs}: expert failed at step {}: {e}", state.clock());
                    ds.meta.skipped_houses.push(hs);
                    break;
                }
            };
            let obs = hist.last_observation();
            let vis = if obs.target_visible() { TGT_VISIBLE } else { TGT_HIDDEN };
            let trace = TrueTrace([
                vis,
                distance_bucket(state.geodesic()),
                frontier_token(&map),
                direction_token(action),
            ]);
            let ctx = hist.context(house.target_category, map_features(&map, &cfg.map), Mode::NoThink);
            ds.nrd.push(ExpertSample {
                id: ds.nrd.len() as u64,
                house_seed: hs,
                step: state.clock(),
                context: ctx,
                target_tokens: vec![action.id()],
                expert_action: action,
                true_trace: trace,
                source_entropy: None,
            });
            let executed = if cfg.explore > 0.0 && action != NavAction::End && rng.random_bool(cfg.explore) {
                MOTIONS[rng.random_range(0..MOTIONS.len())]
            } else {
                action
            };
            let out = state.step(executed)?;
            map.update(state.pose(), &out.observation)?;
            hist.push(executed, out.observation);
        }
    }
    if ds.nrd.len() < n_steps {
        return Err(TrainerError::Data(format!(
            "only {} of {n_steps} expert steps from {} houses",
            ds.nrd.len(),
            house_seeds.len()
        )));
    }
    Ok(ds)
}

/// Scores every reflexive sample under `net` (filling `source_entropy`) and
/// returns the indices of the `round(top_fraction * n)` highest, ties broken
/// by lower id.
pub fn entropy_filter(ds: &mut HybridDataset, net: &PolicyNet, top_fraction: f64) -> Result<Vec<usize>, TrainerError> {
    if ds.nrd.is_empty() {
        return Err(TrainerError::Data("entropy filter on an empty dataset".into()));
    }
    for s in ds.nrd.iter_mut() {
        let out = net.act_nothink(&s.context.with_mode(Mode::NoThink), 0.0, 0)?;
        s.source_entropy = Some(out.entropy_norm);
    }
    let mut order: Vec<usize> = (0..ds.nrd.len()).collect();
    order.sort_by(|&a, &b| {
        let (ea, eb) = (ds.nrd[a].source_entropy.unwrap(), ds.nrd[b].source_entropy.unwrap());
        eb.total_cmp(&ea).then(ds.nrd[a].id.cmp(&ds.nrd[b].id))
    });
    let keep = ((top_fraction.clamp(0.0, 1.0) * ds.nrd.len() as f64).round() as usize).min(ds.nrd.len());
    order.truncate(keep);
    ds.meta.top_fraction = Some(top_fraction);
    Ok(order)
}

/// Draws one annotator trace: each true token is independently replaced,
/// with probability `noise`, by a uniformly drawn member of its family.
pub fn draw_trace(truth: &TrueTrace, noise: f64, rng: &mut ChaCha8Rng) -> [usize; 4] {
    let mut out = truth.0;
    let families = [
        Family::Visibility,
        Family::Distance,
        Family::Frontier,
        Family::Direction,
    ];
    for (tok, fam) in out.iter_mut().zip(families) {
        if rng.random_bool(noise) {
            let m = fam.members();
            *tok = rng.random_range(m);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationStats {
    pub accepted: usize,
    pub discarded: usize,
    pub attempts: usize,
}

/// Thinking samples for `subset`: up to `max_attempts` annotator draws per
/// sample; the first whose implied action equals the expert action is kept.
pub fn annotate_reasoning(
    subset: &[&ExpertSample],
    noise: f64,
    max_attempts: usize,
    seed: u64,
) -> (Vec<ExpertSample>, AnnotationStats) {
    let mut stats = AnnotationStats::default();
    let mut out = Vec::new();
    for s in subset {
        let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, s.id));
        let mut accepted = None;
        for _ in 0..max_attempts {
            stats.attempts += 1;
            let trace = draw_trace(&s.true_trace, noise, &mut rng);
            if implied_action(&trace) == Some(s.expert_action) {
                accepted = Some(trace);
                break;
            }
        }
        let Some(trace) = accepted else {
            stats.discarded += 1;
            continue;
        };
        let mut tokens = trace.to_vec();
        tokens.push(EOT);
        tokens.push(s.expert_action.id());
        // consistency filter: the trace must imply the final action token
        if implied_action(&tokens[..tokens.len() - 1]).map(|a| a.id()) != tokens.last().copied() {
            stats.discarded += 1;
            continue;
        }
        stats.accepted += 1;
        out.push(ExpertSample {
            context: s.context.with_mode(Mode::Think),
            target_tokens: tokens,
            ..(*s).clone()
        });
    }
    (out, stats)
}

/// Bootstrap pipeline: score with `bootstrap_net`, keep the top fraction and
/// annotate it into `ds.rd`.
pub fn build_hybrid(
    ds: &mut HybridDataset,
    bootstrap_net: &PolicyNet,
    top_fraction: f64,
    noise: f64,
    max_attempts: usize,
    seed: u64,
) -> Result<AnnotationStats, TrainerError> {
    let picked = entropy_filter(ds, bootstrap_net, top_fraction)?;
    let subset: Vec<&ExpertSample> = picked.iter().map(|&i| &ds.nrd[i]).collect();
    let (rd, stats) = annotate_reasoning(&subset, noise, max_attempts, seed);
    info!(
        "annotated {} of {} filtered samples ({} discarded, {} attempts)",
        stats.accepted,
        subset.len(),
        stats.discarded,
        stats.attempts
    );
    ds.rd = rd;
    ds.meta.annotator_noise = Some(noise);
    ds.meta.max_attempts = Some(max_attempts);
    ds.meta.annotation_seed = Some(seed);
    ds.meta.discarded = stats.discarded;
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub nrd: usize,
    pub rd: usize,
    pub meta: DatasetMeta,
    /// SHA-256 of the samples file.
    pub content_hash: String,
}

/// Writes `<stem>.jsonl` (reflexive then thinking samples) and `<stem>.manifest.json`.
pub fn save_dataset(ds: &HybridDataset, dir: &Path, stem: &str) -> Result<Manifest, TrainerError> {
    std::fs::create_dir_all(dir)?;
    let mut buf = Vec::new();
    for s in ds.all() {
        serde_json::to_writer(&mut buf, s).map_err(|e| TrainerError::Data(e.to_string()))?;
        buf.push(b'\n');
    }
    std::fs::write(dir.join(format!("{stem}.jsonl")), &buf)?;
    let manifest = Manifest {
        nrd: ds.nrd.len(),
        rd: ds.rd.len(),
        meta: ds.meta.clone(),
        content_hash: hex::encode(Sha256::digest(&buf)),
    };
    let mut f = std::fs::File::create(dir.join(format!("{stem}.manifest.json")))?;
    serde_json::to_writer_pretty(&mut f, &manifest).map_err(|e| TrainerError::Data(e.to_string()))?;
    f.write_all(b"\n")?;
    Ok(manifest)
}

pub fn load_dataset(dir: &Path, stem: &str) -> Result<HybridDataset, TrainerError> {
    let manifest_path = dir.join(format!("{stem}.manifest.json"));
    let manifest: Manifest = serde_json::from_reader(std::fs::File::open(&manifest_path)?)
        .map_err(|e| TrainerError::Data(format!("{}: {e}", manifest_path.display())))?;
    let bytes = std::fs::read(dir.join(format!("{stem}.jsonl")))?;
    if hex::encode(Sha256::digest(&bytes)) != manifest.content_hash {
        return Err(TrainerError::Data(format!(
            "{stem}.jsonl does not match its manifest hash"
        )));
    }
    let mut samples = Vec::new();
    for (i, line) in bytes.lines().enumerate() {
        let line = line?;
        let s: ExpertSample =
            serde_json::from_str(&line).map_err(|e| TrainerError::Data(format!("{stem}.jsonl:{}: {e}", i + 1)))?;
        samples.push(s);
    }
    if samples.len() != manifest.nrd + manifest.rd {
        return Err(TrainerError::Data("sample count differs from manifest".into()));
    }
    let rd = samples.split_off(manifest.nrd);
    Ok(HybridDataset {
        nrd: samples,
        rd,
        meta: manifest.meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::vocab::{is_action, DIST_0, DIST_1};

    fn small_ds(n: usize) -> HybridDataset {
        collect_expert_dataset(
            &(0..50).collect::<Vec<_>>(),
            &CollectConfig {
                n_steps: n,
                ..CollectConfig::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn exact_count_and_expert_targets() {
        let ds = small_ds(300);
        assert_eq!(ds.nrd.len(), 300);
        for s in &ds.nrd {
            assert_eq!(s.target_tokens, vec![s.expert_action.id()]);
            assert_eq!(s.context.mode, Mode::NoThink);
        }
    }

    #[test]
    fn true_trace_implies_expert_except_move_back() {
        let ds = small_ds(500);
        for s in &ds.nrd {
            let implied = implied_action(&s.true_trace.0);
            if s.expert_action == NavAction::MoveBack {
                assert_eq!(implied, Some(NavAction::RotateLeft));
            } else {
                assert_eq!(implied, Some(s.expert_action), "{:?}", s.true_trace);
            }
        }
    }

    #[test]
    fn zero_noise_accepts_first_attempt() {
        let ds = small_ds(200);
        let subset: Vec<&ExpertSample> = ds
            .nrd
            .iter()
            .filter(|s| s.expert_action != NavAction::MoveBack)
            .collect();
        let (rd, stats) = annotate_reasoning(&subset, 0.0, 8, 1);
        assert_eq!(stats.accepted, subset.len());
        assert_eq!(stats.attempts, subset.len());
        for s in &rd {
            assert_eq!(s.context.mode, Mode::Think);
            assert!(is_action(*s.target_tokens.last().unwrap()));
            let body = &s.target_tokens[..s.target_tokens.len() - 1];
            assert_eq!(implied_action(body), Some(s.expert_action));
        }
    }

    /// Per-attempt probability that a uniformly random trace implies `a`.
    fn p_uniform(a: NavAction) -> f64 {
        let p_end = 0.5 * 0.5;
        match a {
            NavAction::End => p_end,
            NavAction::MoveAhead | NavAction::RotateRight => (1.0 - p_end) * 0.25,
            NavAction::RotateLeft => (1.0 - p_end) * 0.5,
            NavAction::MoveBack => 0.0,
        }
    }

    #[test]
    fn full_noise_acceptance_matches_analytic_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let truth = TrueTrace([TGT_HIDDEN, DIST_1, FRONTIER_NONE, DIR_RIGHT]);
        for a in [NavAction::RotateRight, NavAction::End, NavAction::RotateLeft] {
            let p1 = p_uniform(a);
            let expected = 1.0 - (1.0 - p1).powi(8);
            let n = 10_000;
            let mut hits = 0;
            for _ in 0..n {
                if (0..8).any(|_| implied_action(&draw_trace(&truth, 1.0, &mut rng)) == Some(a)) {
                    hits += 1;
                }
            }
            let rate = hits as f64 / n as f64;
            let sigma = (expected * (1.0 - expected) / n as f64).sqrt();
            assert!((rate - expected).abs() <= 3.0 * sigma, "{a:?}: {rate} vs {expected}");
        }
        let _ = DIST_0;
    }

    #[test]
    fn filter_keeps_top_by_entropy() {
        let mut ds = small_ds(10);
        let net = crate::policy::test_fixtures::small_net(1);
        let picked = entropy_filter(&mut ds, &net, 0.2).unwrap();
        assert_eq!(picked.len(), 2);
        let min_sel = picked
            .iter()
            .map(|&i| ds.nrd[i].source_entropy.unwrap())
            .fold(f64::INFINITY, f64::min);
        let max_rest = (0..10)
            .filter(|i| !picked.contains(i))
            .map(|i| ds.nrd[i].source_entropy.unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(min_sel >= max_rest);
        assert_eq!(entropy_filter(&mut ds, &net, 1.0).unwrap().len(), 10);
        assert!(entropy_filter(&mut HybridDataset::default(), &net, 0.2).is_err());
    }

    #[test]
    fn dataset_files_are_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = small_ds(120);
        let net = crate::policy::test_fixtures::small_net(2);
        build_hybrid(&mut a, &net, 0.2, 0.1, 8, 4).unwrap();
        let m1 = save_dataset(&a, dir.path(), "a").unwrap();
        let mut b = small_ds(120);
        build_hybrid(&mut b, &net, 0.2, 0.1, 8, 4).unwrap();
        let m2 = save_dataset(&b, dir.path(), "b").unwrap();
        assert_eq!(m1.content_hash, m2.content_hash);
        assert_eq!(
            std::fs::read(dir.path().join("a.jsonl")).unwrap(),
            std::fs::read(dir.path().join("b.jsonl")).unwrap()
        );
        let back = load_dataset(dir.path(), "a").unwrap();
        assert_eq!(back, a);
        assert!(a.rd.len() <= 24);
    }
}
