use serde::{Deserialize, Serialize};

use super::{EpisodeRecord, EvalError};
use crate::policy::{Mode, PolicyContext, PolicyNet};
use crate::semantic_map::{render_map, AnnotatedMap, Pixmap};

pub const HIST_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyHistogram {
    /// Counts over `[0, 1]` in 20 equal bins; the last bin is closed.
    pub counts: Vec<u64>,
    pub total: u64,
    /// `(τ, fraction of values ≥ τ)`.
    pub above: Vec<(f64, f64)>,
}

impl EntropyHistogram {
    pub fn fraction_above(&self, tau: f64) -> Option<f64> {
        self.above.iter().find(|(t, _)| *t == tau).map(|(_, f)| *f)
    }
}

pub fn entropy_histogram_of(values: &[f64], taus: &[f64]) -> EntropyHistogram {
    let mut counts = vec![0u64; HIST_BINS];
    for &v in values {
        let b = ((v.clamp(0.0, 1.0) * HIST_BINS as f64) as usize).min(HIST_BINS - 1);
        counts[b] += 1;
    }
    let n = values.len().max(1) as f64;
    let above = taus
        .iter()
        .map(|&t| (t, values.iter().filter(|&&v| v >= t).count() as f64 / n))
        .collect();
    EntropyHistogram {
        counts,
        total: values.len() as u64,
        above,
    }
}

/// Histogram of reflexive-mode normalized entropy over `contexts`.
pub fn entropy_histogram(
    net: &PolicyNet,
    contexts: &[PolicyContext],
    taus: &[f64],
) -> Result<EntropyHistogram, EvalError> {
    let mut values = Vec::with_capacity(contexts.len());
    for ctx in contexts {
        let out = net
            .act_nothink(&ctx.with_mode(Mode::NoThink), 0.0, 0)
            .map_err(|e| EvalError::Invalid(e.to_string()))?;
        values.push(out.entropy_norm);
    }
    Ok(entropy_histogram_of(&values, taus))
}

/// Per-segment entropies aligned with the map trajectory: steps that leave
/// the pose unchanged are folded into the next step that moves, and the last
/// step of each run supplies the value.
pub fn heatmap_overlay(record: &EpisodeRecord) -> Result<Vec<f64>, EvalError> {
    let steps = record.steps as usize;
    if record.entropies.len() != steps || record.poses.len() != steps + 1 {
        return Err(EvalError::Invalid(format!(
            "record has {} entropies and {} poses for {} steps",
            record.entropies.len(),
            record.poses.len(),
            steps
        )));
    }
    Ok((0..steps)
        .filter(|&t| record.poses[t + 1] != record.poses[t])
        .map(|t| record.entropies[t])
        .collect())
}

/// The final map rendered with per-waypoint entropies.
pub fn entropy_heatmap(record: &EpisodeRecord, map: &AnnotatedMap) -> Result<Pixmap, EvalError> {
    let overlay = heatmap_overlay(record)?;
    Ok(render_map(map, Some(&overlay))?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub name: String,
    pub count: usize,
    /// `None` for an empty bucket.
    pub success_rate: Option<f64>,
    pub thinking_ratio: Option<f64>,
}

/// Easy `[0, b1)`, medium `[b1, b2]`, hard `(b2, ∞)` by oracle length.
pub fn difficulty_stratify(records: &[EpisodeRecord], b1: u32, b2: u32) -> [Bucket; 3] {
    let names = ["easy", "medium", "hard"];
    let which = |w: u32| {
        if w < b1 {
            0
        } else if w <= b2 {
            1
        } else {
            2
        }
    };
    std::array::from_fn(|i| {
        let rs: Vec<&EpisodeRecord> = records.iter().filter(|r| which(r.shortest) == i).collect();
        let n = rs.len();
        let mean = |f: &dyn Fn(&EpisodeRecord) -> f64| (n > 0).then(|| rs.iter().map(|r| f(r)).sum::<f64>() / n as f64);
        Bucket {
            name: names[i].to_string(),
            count: n,
            success_rate: mean(&|r| f64::from(u8::from(r.success))),
            thinking_ratio: mean(&|r| r.thinking_ratio()),
        }
    })
}
