//! Supervised half of the pipeline: bootstrap SFT on reflexive data, entropy
//! filter and annotation, then hybrid SFT from a fresh initialization.

use log::info;
use serde::{Deserialize, Serialize};

use super::data::{build_hybrid, AnnotationStats, HybridDataset};
use super::sft::{hsft_train, SftConfig};
use super::TrainerError;
use crate::policy::{PolicyConfig, PolicyNet};
use crate::seeds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftPipelineConfig {
    pub policy: PolicyConfig,
    pub bootstrap: SftConfig,
    pub hsft: SftConfig,
    pub top_fraction: f64,
    pub annotator_noise: f64,
    pub max_attempts: usize,
    pub seed: u64,
}

impl Default for SftPipelineConfig {
    fn default() -> Self {
        Self {
            policy: PolicyConfig::default(),
            bootstrap: SftConfig::default(),
            hsft: SftConfig::default(),
            top_fraction: 0.2,
            annotator_noise: 0.1,
            max_attempts: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SftPipelineOutput {
    pub bootstrap_net: PolicyNet,
    pub hsft_net: PolicyNet,
    pub bootstrap_curve: Vec<f64>,
    pub hsft_curve: Vec<f64>,
    pub annotation: AnnotationStats,
}

/// Fills `ds.rd` and returns both the bootstrap and the H-SFT nets.
pub fn run_sft_pipeline(ds: &mut HybridDataset, cfg: &SftPipelineConfig) -> Result<SftPipelineOutput, TrainerError> {
    let mut boot = PolicyNet::new(PolicyConfig {
        init_seed: seeds::derive_named(cfg.seed, "bootstrap_init"),
        ..cfg.policy.clone()
    });
    let bootstrap_curve = hsft_train(
        &mut boot,
        &ds.nrd,
        &SftConfig {
            seed: seeds::derive_named(cfg.seed, "bootstrap_sft"),
            ..cfg.bootstrap.clone()
        },
    )?;
    let annotation = build_hybrid(
        ds,
        &boot,
        cfg.top_fraction,
        cfg.annotator_noise,
        cfg.max_attempts,
        seeds::derive_named(cfg.seed, "annotate"),
    )?;
    let mut net = PolicyNet::new(PolicyConfig {
        init_seed: seeds::derive_named(cfg.seed, "hsft_init"),
        ..cfg.policy.clone()
    });
    let hsft_curve = hsft_train(
        &mut net,
        ds.all(),
        &SftConfig {
            seed: seeds::derive_named(cfg.seed, "hsft"),
            ..cfg.hsft.clone()
        },
    )?;
    info!(
        "sft pipeline: {} reflexive + {} thinking samples, final loss {:.4}",
        ds.nrd.len(),
        ds.rd.len(),
        hsft_curve.last().copied().unwrap_or(f64::NAN)
    );
    Ok(SftPipelineOutput {
        bootstrap_net: boot,
        hsft_net: net,
        bootstrap_curve,
        hsft_curve,
        annotation,
    })
}
