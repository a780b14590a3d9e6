//! Metrics and analyses over evaluation episodes.

mod analysis;
mod report;
mod runs;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gate::GateError;
use crate::navsim::AgentPose;
use crate::semantic_map::MapError;

pub use analysis::{
    difficulty_stratify, entropy_heatmap, entropy_histogram, entropy_histogram_of, heatmap_overlay, Bucket,
    EntropyHistogram, HIST_BINS,
};
pub use report::{emit_report, Report, StrategySummary, STRATEGY_CSV_HEADER};
pub use runs::{
    discounted_return, evaluate, evaluate_episodes, q_threshold_sweep, robustness_curve, RobustnessPoint, SweepResult,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{0}: no records")]
    Empty(&'static str),
    #[error("pass@{k} needs at least {k} samples per task, a task has {n}")]
    TooFewSamples { k: usize, n: usize },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One evaluation episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    /// Seed of the house.
    pub task_id: u64,
    pub success: bool,
    /// Steps taken `e_i`.
    pub steps: u32,
    /// Oracle episode length `w_i`.
    pub shortest: u32,
    pub tokens_generated: u64,
    pub thought_steps: u32,
    /// Per-step normalized action entropy: the reflexive pass where one ran,
    /// otherwise the executed output's action-position entropy.
    pub entropies: Vec<f64>,
    pub rewards: Vec<f64>,
    /// Pose before each step plus the final pose.
    pub poses: Vec<AgentPose>,
    pub actions: Vec<u8>,
    pub thoughts: Vec<bool>,
    pub strategy: String,
    pub seed: u64,
}

impl EpisodeRecord {
    pub fn empty(strategy: &str) -> Self {
        Self {
            task_id: 0,
            success: false,
            steps: 0,
            shortest: 1,
            tokens_generated: 0,
            thought_steps: 0,
            entropies: vec![],
            rewards: vec![],
            poses: vec![],
            actions: vec![],
            thoughts: vec![],
            strategy: strategy.to_string(),
            seed: 0,
        }
    }

    /// Summary fixture used by metric tests.
    pub fn outcome(success: bool, shortest: u32, steps: u32) -> Self {
        Self {
            success,
            shortest,
            steps,
            ..Self::empty("fixture")
        }
    }

    pub fn thinking_ratio(&self) -> f64 {
        self.thought_steps as f64 / self.steps.max(1) as f64
    }
}

pub fn success_rate(records: &[EpisodeRecord]) -> Result<f64, EvalError> {
    if records.is_empty() {
        return Err(EvalError::Empty("success_rate"));
    }
    Ok(records.iter().filter(|r| r.success).count() as f64 / records.len() as f64)
}

/// `1/N Σ S_i w_i / max(w_i, e_i)`.
pub fn sel(records: &[EpisodeRecord]) -> Result<f64, EvalError> {
    if records.is_empty() {
        return Err(EvalError::Empty("sel"));
    }
    let total: f64 = records
        .iter()
        .filter(|r| r.success)
        .map(|r| r.shortest as f64 / r.shortest.max(r.steps) as f64)
        .fold(0.0, |a, b| a + b);
    Ok(total / records.len() as f64)
}

/// Unbiased pass@k `1 - C(n-c, k) / C(n, k)` averaged over tasks, for each k.
pub fn pass_at_k(tasks: &[(usize, usize)], ks: &[usize]) -> Result<Vec<(usize, f64)>, EvalError> {
    if tasks.is_empty() {
        return Err(EvalError::Empty("pass_at_k"));
    }
    let mut out = Vec::with_capacity(ks.len());
    for &k in ks {
        let mut sum = 0.0;
        for &(n, c) in tasks {
            if k > n {
                return Err(EvalError::TooFewSamples { k, n });
            }
            sum += pass_at_k_single(n, c.min(n), k);
        }
        out.push((k, sum / tasks.len() as f64));
    }
    Ok(out)
}

fn pass_at_k_single(n: usize, c: usize, k: usize) -> f64 {
    if n - c < k {
        return 1.0;
    }
    // C(n-c, k) / C(n, k) = Π_{i=n-c+1}^{n} (1 - k / i)
    let ratio: f64 = ((n - c + 1)..=n).map(|i| 1.0 - k as f64 / i as f64).product();
    1.0 - ratio
}

/// Per-task `(n, c)` from repeated evaluations keyed by `task_id`, in first-seen order.
pub fn success_counts(records: &[EpisodeRecord]) -> Vec<(usize, usize)> {
    let mut order: Vec<u64> = Vec::new();
    let mut counts: std::collections::HashMap<u64, (usize, usize)> = Default::default();
    for r in records {
        let e = counts.entry(r.task_id).or_insert_with(|| {
            order.push(r.task_id);
            (0, 0)
        });
        e.0 += 1;
        e.1 += usize::from(r.success);
    }
    order.iter().map(|t| counts[t]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom(n: usize, k: usize) -> f64 {
        if k > n {
            return 0.0;
        }
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    #[test]
    fn sr_examples() {
        let r = |s| EpisodeRecord::outcome(s, 5, 5);
        assert_eq!(success_rate(&[r(true), r(true), r(false), r(false)]).unwrap(), 0.5);
        assert_eq!(success_rate(&[r(true), r(true)]).unwrap(), 1.0);
        assert_eq!(success_rate(&[r(false)]).unwrap(), 0.0);
        assert!(success_rate(&[]).is_err());
    }

    #[test]
    fn sel_examples() {
        let recs = [
            EpisodeRecord::outcome(true, 10, 10),
            EpisodeRecord::outcome(true, 10, 20),
            EpisodeRecord::outcome(false, 5, 600),
        ];
        assert_eq!(sel(&recs).unwrap(), 0.5);
        assert_eq!(sel(&recs[..1]).unwrap(), 1.0);
        assert_eq!(sel(&[EpisodeRecord::outcome(true, 10, 7)]).unwrap(), 1.0);
        assert!(sel(&recs[2..]).unwrap().is_sign_positive());
        assert!(sel(&[]).is_err());
    }

    #[test]
    fn pass_at_k_examples() {
        assert_eq!(pass_at_k(&[(2, 1)], &[1]).unwrap(), vec![(1, 0.5)]);
        for (k, v) in pass_at_k(&[(16, 16)], &[1, 2, 4, 8, 16]).unwrap() {
            assert_eq!(v, 1.0, "k={k}");
        }
        for (_, v) in pass_at_k(&[(16, 0)], &[1, 2, 4, 8, 16]).unwrap() {
            assert_eq!(v, 0.0);
        }
        assert!(matches!(
            pass_at_k(&[(4, 1)], &[8]),
            Err(EvalError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn pass_at_k_matches_binomials_and_is_monotone() {
        let tasks: Vec<(usize, usize)> = (0..=16).map(|c| (16, c)).collect();
        let curve = pass_at_k(&tasks, &[1, 2, 4, 8, 16]).unwrap();
        for w in curve.windows(2) {
            assert!(w[1].1 >= w[0].1);
        }
        let mean_c: f64 = tasks.iter().map(|&(n, c)| c as f64 / n as f64).sum::<f64>() / tasks.len() as f64;
        assert!((curve[0].1 - mean_c).abs() < 1e-12);
        for &(n, c) in &tasks {
            for k in [1, 3, 5, 16] {
                let direct = 1.0 - binom(n - c, k) / binom(n, k);
                assert!((pass_at_k_single(n, c, k) - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn counts_group_by_task() {
        let mut a = EpisodeRecord::outcome(true, 3, 3);
        a.task_id = 7;
        let mut b = a.clone();
        b.success = false;
        let mut c = a.clone();
        c.task_id = 9;
        assert_eq!(success_counts(&[a, b, c]), vec![(2, 1), (1, 1)]);
    }
}
