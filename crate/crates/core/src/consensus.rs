//! Empirical answer distribution, answer entropy, and the dominant-answer
//! group with its density factor.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::trace::{NormalizedAnswer, ParsedRollout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum ConsensusError {
    #[error("batch contains no parsed rollouts")]
    EmptyBatch,
    #[error("gamma must be finite and non-negative")]
    InvalidGamma,
}

/// Which sample count divides the answer counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleCount {
    /// Only rollouts that parsed.
    #[default]
    Parsed,
    /// Every attempted rollout, including parse failures.
    Attempted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerDistribution {
    counts: BTreeMap<NormalizedAnswer, usize>,
    n: usize,
}

impl AnswerDistribution {
    pub fn counts(&self) -> &BTreeMap<NormalizedAnswer, usize> {
        &self.counts
    }

    /// The denominator of every probability.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn count(&self, answer: &NormalizedAnswer) -> usize {
        self.counts.get(answer).copied().unwrap_or(0)
    }

    pub fn probability<T: Scalar>(&self, answer: &NormalizedAnswer) -> T {
        T::of_count(self.count(answer)) / T::of_count(self.n)
    }

    pub fn probabilities<T: Scalar>(&self) -> BTreeMap<NormalizedAnswer, T> {
        self.counts
            .keys()
            .map(|a| (a.clone(), self.probability(a)))
            .collect()
    }
}

/// Counts normalized answers; probabilities are `count / N`.
pub fn empirical_distribution(rollouts: &[ParsedRollout]) -> Result<AnswerDistribution, ConsensusError> {
    empirical_distribution_over(rollouts, rollouts.len())
}

/// As [`empirical_distribution`], dividing by `attempted` instead of the parsed
/// count (parse failures then hold the missing probability mass).
pub fn empirical_distribution_over(
    rollouts: &[ParsedRollout],
    attempted: usize,
) -> Result<AnswerDistribution, ConsensusError> {
    if rollouts.is_empty() {
        return Err(ConsensusError::EmptyBatch);
    }
    let mut counts = BTreeMap::new();
    for r in rollouts {
        *counts.entry(r.answer.clone()).or_insert(0) += 1;
    }
    Ok(AnswerDistribution { counts, n: attempted.max(rollouts.len()) })
}

/// Shannon entropy of the answer distribution in nats.
pub fn answer_entropy<T: Scalar>(dist: &AnswerDistribution) -> T {
    let n = T::of_count(dist.n);
    let h: T = dist
        .counts
        .values()
        .map(|&c| {
            let p = T::of_count(c) / n;
            -p * p.ln()
        })
        .sum();
    // -1 * ln 1 is -0.0
    h.max(T::zero())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominantGroup<T> {
    pub answer: NormalizedAnswer,
    /// Rollout indices with `answer`, in input order.
    pub member_indices: Vec<usize>,
    pub density: T,
    pub gamma: T,
}

impl<T: Scalar> DominantGroup<T> {
    pub fn size(&self) -> usize {
        self.member_indices.len()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.member_indices.binary_search(&index).is_ok()
    }
}

/// Majority answer (ties go to the lexicographically smallest answer), its
/// members, and the density factor `(|G| / N)^gamma`.
pub fn dominant_group<T: Scalar>(
    rollouts: &[ParsedRollout],
    dist: &AnswerDistribution,
    gamma: T,
) -> Result<DominantGroup<T>, ConsensusError> {
    if !(gamma >= T::zero()) || !gamma.is_finite() {
        return Err(ConsensusError::InvalidGamma);
    }
    // BTreeMap iterates in ascending order, so keeping only strictly larger
    // counts retains the smallest answer among ties.
    let (answer, _) = dist
        .counts
        .iter()
        .fold(None::<(&NormalizedAnswer, usize)>, |best, (a, &c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((a, c)),
        })
        .ok_or(ConsensusError::EmptyBatch)?;
    let member_indices: Vec<usize> = rollouts
        .iter()
        .enumerate()
        .filter(|(_, r)| &r.answer == answer)
        .map(|(i, _)| i)
        .collect();
    let fraction = T::of_count(member_indices.len()) / T::of_count(dist.n);
    Ok(DominantGroup {
        answer: answer.clone(),
        member_indices,
        density: fraction.powf(gamma),
        gamma,
    })
}
