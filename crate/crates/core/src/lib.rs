//! Intrinsic rewards from chain-of-thought agreement.
//!
//! A batch of sampled rollouts is parsed into steps and a final answer. The
//! answer distribution yields an entropy and a dominant group; steps of the
//! dominant group are embedded, averaged into per-position prototypes, and
//! every rollout is rewarded by how closely its steps track those prototypes.
//! The [`selfplay`] module wires these rewards into a small Proposer/Solver
//! training loop over categorical policies.

pub mod config;
pub mod consensus;
pub mod diagnostics;
pub mod embed;
pub mod optim;
pub mod reward;
mod scalar;
pub mod scoring;
pub mod selfplay;
pub mod trace;

pub use config::{Config, ConfigError, LearnerConfig, SimulatorConfig};
pub use consensus::{
    answer_entropy, dominant_group, empirical_distribution, empirical_distribution_over, AnswerDistribution,
    ConsensusError, DominantGroup, SampleCount,
};
pub use diagnostics::{
    aggregate_profiles, disagreement_profile, loo_similarity, DiagnosticsError, DisagreementProfile, Heatmap,
    LooMatrix,
};
pub use embed::{cosine, hashed_embed, prototypes, EmbedConfig, EmbedError, Embedder, HashedEmbedder, StepEmbedding, StepPrototype};
pub use optim::{
    adapt_beta, expected_reinforce_grad, kl_categorical, kl_grad, regularized_step, reinforce_grad, update_baseline,
    CategoricalPolicy, EmaBaseline, KlController, OptimError, StepReport,
};
pub use reward::{
    answer_reward, lambda_at, length_excess, mixed_reward, position_weights, proposer_reward, step_agreement_rewards,
    MixSchedule, ProposerShaping, RewardError, ShapingKind, StepAgreement, StepWeights,
};
pub use scalar::Scalar;
pub use scoring::{diagnose_batch, score_batch, BatchScore, ParseFailure, RewardBreakdown, RewardParams, ScoreError};
pub use trace::{
    normalize_answer, parse_rollout, split_steps, NormalizedAnswer, ParseConfig, ParseError, ParsedRollout, RawRollout,
    RolloutRecord,
};

pub type Real = f64;
pub type Policy = CategoricalPolicy<f64>;
pub type Policy32 = CategoricalPolicy<f32>;
pub type Embedding = StepEmbedding<f64>;
pub type Embedding32 = StepEmbedding<f32>;
pub type Group = DominantGroup<f64>;
pub type Breakdown = RewardBreakdown<f64>;
pub type Score = BatchScore<f64>;
pub type Score32 = BatchScore<f32>;
pub type Params = RewardParams<f64>;
pub type Params32 = RewardParams<f32>;
pub type Controller = KlController<f64>;
pub type Baseline = EmaBaseline<f64>;
pub type Schedule = MixSchedule<f64>;
pub type Shaping = ProposerShaping<f64>;
pub type Matrix = LooMatrix<f64>;
pub type Profile = DisagreementProfile<f64>;
