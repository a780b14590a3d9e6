//! Expert data, entropy filtering, trace annotation, hybrid SFT and the
//! two-stage PPO schedule.

pub mod data;
pub mod pipeline;
pub mod ppo;
pub mod rollout;
pub mod sft;
pub mod two_stage;

use thiserror::Error;

use crate::gate::GateError;
use crate::navsim::NavError;
use crate::policy::PolicyError;
use crate::semantic_map::MapError;

pub use data::{
    annotate_reasoning, build_hybrid, collect_expert_dataset, draw_trace, entropy_filter, load_dataset, save_dataset,
    AnnotationStats, CollectConfig, DatasetMeta, ExpertSample, HybridDataset, Manifest, TrueTrace,
};
pub use pipeline::{run_sft_pipeline, SftPipelineConfig, SftPipelineOutput};
pub use ppo::{mean_reflex_kl, ppo_loss_graph, ppo_update, PpoBatch, PpoConfig, PpoStats};
pub use rollout::{collect_rollouts, compute_gae, gae, RolloutBuffer, Stage};
pub use sft::{encode_samples, hsft_train, hsft_train_items, sft_loss, sft_loss_graph, SftConfig, SftItem};
pub use two_stage::{train_stage, train_two_stage, StageOutcome, TwoStageConfig, TwoStageOutcome, UpdateLog};

#[derive(Debug, Error)]
pub enum TrainerError {
    #[error("data: {0}")]
    Data(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Nav(#[from] NavError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
