//! End-to-end batch scoring: parse, vote, embed, and break every rollout's
//! reward down into its components.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::consensus::{
    answer_entropy, dominant_group, empirical_distribution_over, ConsensusError, SampleCount,
};
use crate::diagnostics::{disagreement_profile, loo_similarity, DiagnosticsError, DisagreementProfile, LooMatrix};
use crate::embed::{Embedder, StepEmbedding};
use crate::reward::{answer_reward, length_excess, mixed_reward, position_weights, step_agreement_rewards, RewardError};
use crate::scalar::Scalar;
use crate::trace::{parse_rollout, ParseConfig, ParsedRollout, RawRollout};

/// Constants of the Solver reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardParams<T> {
    /// Sharpness of `p^alpha`.
    pub alpha: T,
    /// Length-penalty strength.
    pub eta_len: T,
    /// Density exponent.
    pub gamma: T,
    /// Geometric decay of the position weights.
    pub delta: T,
    /// Pre-answer token budget before the length penalty applies.
    pub target_length: usize,
    pub sample_count: SampleCount,
}

impl<T: Scalar> Default for RewardParams<T> {
    fn default() -> Self {
        Self {
            alpha: T::one(),
            eta_len: T::of(0.1),
            gamma: T::of(0.5),
            delta: T::of(0.7),
            target_length: 128,
            sample_count: SampleCount::Parsed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScoreError {
    #[error("batch is empty")]
    EmptyBatch,
    #[error("none of the {0} rollouts parsed")]
    NoParsedRollouts(usize),
    #[error("invalid lambda: must lie in [0, 1]")]
    InvalidLambda,
    #[error(transparent)]
    Consensus(#[from] ConsensusError),
    #[error(transparent)]
    Reward(#[from] RewardError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseFailure {
    pub index: usize,
    pub error: String,
}

/// Per-rollout reward audit record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown<T> {
    /// Position of the rollout in the submitted batch.
    pub index: usize,
    pub answer: String,
    pub in_group: bool,
    pub p_of_answer: T,
    pub length_excess: T,
    pub r_ans: T,
    pub r_step_raw: T,
    pub r_step: T,
    pub r_sol: T,
    pub step_similarities: Vec<Option<T>>,
}

/// Everything computed for one batch of rollouts to the same question.
#[derive(Debug, Clone)]
pub struct BatchScore<T> {
    pub attempted: usize,
    pub parse_failures: Vec<ParseFailure>,
    /// Parsed rollouts with their batch positions.
    pub parsed: Vec<(usize, ParsedRollout)>,
    /// Step embeddings, aligned with `parsed`.
    pub embeddings: Vec<Vec<StepEmbedding<T>>>,
    pub distribution: BTreeMap<String, T>,
    pub entropy: T,
    pub dominant_answer: String,
    /// Batch positions of the dominant group.
    pub group_indices: Vec<usize>,
    /// Dominant-group size over the sample count, before the exponent.
    pub group_fraction: T,
    pub density: T,
    pub lambda: T,
    pub weights: Vec<T>,
    /// Prototype support per step position.
    pub prototype_support: Vec<usize>,
    /// Aligned with `parsed`.
    pub breakdowns: Vec<RewardBreakdown<T>>,
}

impl<T: Scalar> BatchScore<T> {
    /// Group members' batch positions with their step embeddings.
    pub fn group_embeddings(&self) -> Vec<(usize, Vec<StepEmbedding<T>>)> {
        self.parsed
            .iter()
            .zip(&self.embeddings)
            .filter(|((idx, _), _)| self.group_indices.contains(idx))
            .map(|((idx, _), e)| (*idx, e.clone()))
            .collect()
    }

    /// Step positions with at least two supporting group members.
    pub fn valid_step_positions(&self) -> usize {
        self.prototype_support.iter().filter(|&&s| s >= 2).count()
    }

    /// Mean per-step cosine over the dominant group.
    pub fn mean_step_similarity(&self) -> T {
        let sims: Vec<T> = self
            .breakdowns
            .iter()
            .filter(|b| b.in_group)
            .flat_map(|b| b.step_similarities.iter().flatten().copied())
            .collect();
        if sims.is_empty() {
            return T::zero();
        }
        sims.iter().copied().sum::<T>() / T::of_count(sims.len())
    }
}

/// Scores a batch of raw rollout texts with a fixed mixing weight `lambda`.
pub fn score_batch<T: Scalar, E: Embedder<T> + ?Sized>(
    texts: &[String],
    parse: &ParseConfig,
    params: &RewardParams<T>,
    lambda: T,
    embedder: &E,
) -> Result<BatchScore<T>, ScoreError> {
    if texts.is_empty() {
        return Err(ScoreError::EmptyBatch);
    }
    if !(lambda >= T::zero() && lambda <= T::one()) {
        return Err(ScoreError::InvalidLambda);
    }
    let mut parsed = Vec::with_capacity(texts.len());
    let mut parse_failures = Vec::new();
    for (index, text) in texts.iter().enumerate() {
        match parse_rollout(&RawRollout::new(text.as_str()), parse) {
            Ok(p) => parsed.push((index, p)),
            Err(e) => parse_failures.push(ParseFailure { index, error: e.name().to_string() }),
        }
    }
    if parsed.is_empty() {
        return Err(ScoreError::NoParsedRollouts(texts.len()));
    }
    let rollouts: Vec<ParsedRollout> = parsed.iter().map(|(_, p)| p.clone()).collect();
    let denominator = match params.sample_count {
        SampleCount::Parsed => rollouts.len(),
        SampleCount::Attempted => texts.len(),
    };
    let dist = empirical_distribution_over(&rollouts, denominator)?;
    let entropy = answer_entropy::<T>(&dist);
    let group = dominant_group(&rollouts, &dist, params.gamma)?;
    let embeddings: Vec<Vec<StepEmbedding<T>>> = rollouts.iter().map(|r| embedder.embed_steps(&r.steps)).collect();
    let weights = position_weights(parse.max_steps.max(1), params.delta)?;
    let agreement = step_agreement_rewards(&group, &embeddings, &weights)?;

    let mut prototype_support = Vec::new();
    for steps in group.member_indices.iter().map(|&i| &embeddings[i]) {
        for (j, e) in steps.iter().enumerate() {
            if prototype_support.len() <= j {
                prototype_support.push(0);
            }
            if !e.is_zero() {
                prototype_support[j] += 1;
            }
        }
    }

    let mut breakdowns = Vec::with_capacity(rollouts.len());
    for (k, ((index, r), step)) in parsed.iter().zip(agreement).enumerate() {
        let p = dist.probability::<T>(&r.answer);
        let excess = length_excess::<T>(r.pre_answer_tokens, params.target_length);
        let r_ans = answer_reward(p, excess, params.alpha, params.eta_len)?;
        breakdowns.push(RewardBreakdown {
            index: *index,
            answer: r.answer.to_string(),
            in_group: group.contains(k),
            p_of_answer: p,
            length_excess: excess,
            r_ans,
            r_step_raw: step.raw,
            r_step: step.scaled,
            r_sol: mixed_reward(r_ans, step.scaled, lambda),
            step_similarities: step.similarities,
        });
    }

    Ok(BatchScore {
        attempted: texts.len(),
        parse_failures,
        distribution: dist.probabilities::<T>().into_iter().map(|(a, p)| (a.to_string(), p)).collect(),
        entropy,
        dominant_answer: group.answer.to_string(),
        group_indices: group.member_indices.iter().map(|&k| parsed[k].0).collect(),
        group_fraction: T::of_count(group.size()) / T::of_count(dist.n()),
        density: group.density,
        lambda,
        weights: weights.weights,
        prototype_support,
        breakdowns,
        parsed,
        embeddings,
    })
}

/// Leave-one-out diagnostics of an already scored batch.
pub fn diagnose_batch<T: Scalar>(score: &BatchScore<T>) -> Result<(LooMatrix<T>, DisagreementProfile<T>), DiagnosticsError> {
    let matrix = loo_similarity(&score.group_embeddings())?;
    let profile = disagreement_profile(&matrix);
    Ok((matrix, profile))
}
