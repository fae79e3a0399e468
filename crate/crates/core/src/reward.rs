//! Reward formulas: position-weighted step agreement, answer-level reward
//! with length penalty, the warmup/ramp mixing schedule, and the Proposer's
//! entropy-shaped reward.

use serde::{Deserialize, Serialize};

use crate::consensus::DominantGroup;
use crate::embed::{cosine, prototypes, StepEmbedding};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RewardError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: &'static str },
    #[error("rollout {0} is in the dominant group but has no embeddings")]
    MissingEmbeddings(usize),
    #[error(transparent)]
    Embed(#[from] crate::embed::EmbedError),
}

fn invalid(name: &'static str, reason: &'static str) -> RewardError {
    RewardError::InvalidParameter { name, reason }
}

/// Strictly decreasing, normalized position weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepWeights<T> {
    pub weights: Vec<T>,
    pub decay: T,
}

impl<T: Scalar> StepWeights<T> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Weight of 1-based position `j`, zero beyond the budget.
    pub fn at(&self, j: usize) -> T {
        j.checked_sub(1)
            .and_then(|k| self.weights.get(k))
            .copied()
            .unwrap_or_else(T::zero)
    }
}

/// Geometric weights `delta^(j-1)` normalized to sum to one over `j_max`.
pub fn position_weights<T: Scalar>(j_max: usize, delta: T) -> Result<StepWeights<T>, RewardError> {
    if j_max == 0 {
        return Err(invalid("j_max", "must be at least 1"));
    }
    if !(delta > T::zero() && delta < T::one()) {
        return Err(invalid("delta", "must lie in (0, 1)"));
    }
    let raw: Vec<T> = std::iter::successors(Some(T::one()), |w| Some(*w * delta))
        .take(j_max)
        .collect();
    let total: T = raw.iter().copied().sum();
    Ok(StepWeights { weights: raw.into_iter().map(|w| w / total).collect(), decay: delta })
}

/// Step-agreement score of one rollout.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepAgreement<T> {
    /// Weighted sum of cosines before density scaling.
    pub raw: T,
    /// `density * raw`; zero outside the dominant group.
    pub scaled: T,
    /// Cosine to the prototype per step position; `None` where the prototype
    /// has no support. Empty outside the dominant group.
    pub similarities: Vec<Option<T>>,
}

impl<T: Scalar> StepAgreement<T> {
    fn outside() -> Self {
        Self { raw: T::zero(), scaled: T::zero(), similarities: Vec::new() }
    }
}

/// Intrinsic CoT agreement reward for every rollout in `embeddings`.
///
/// `embeddings[i]` are the step embeddings of rollout `i`, indexed the same
/// way as `group.member_indices`. Members score
/// `density * sum_j w_j cos(e_ij, mu_j)`; everyone else scores 0.
pub fn step_agreement_rewards<T: Scalar>(
    group: &DominantGroup<T>,
    embeddings: &[Vec<StepEmbedding<T>>],
    weights: &StepWeights<T>,
) -> Result<Vec<StepAgreement<T>>, RewardError> {
    let members: Vec<Vec<StepEmbedding<T>>> = group
        .member_indices
        .iter()
        .map(|&i| embeddings.get(i).cloned().ok_or(RewardError::MissingEmbeddings(i)))
        .collect::<Result<_, _>>()?;
    let protos = prototypes(&members)?;
    let mut out: Vec<StepAgreement<T>> = (0..embeddings.len()).map(|_| StepAgreement::outside()).collect();
    for (&i, steps) in group.member_indices.iter().zip(&members) {
        let mut raw = T::zero();
        let mut similarities = Vec::with_capacity(steps.len());
        for (e, proto) in steps.iter().zip(&protos) {
            if proto.support == 0 {
                similarities.push(None);
                continue;
            }
            let sim = cosine(e.as_slice(), &proto.vector)?;
            raw += weights.at(proto.index) * sim;
            similarities.push(Some(sim));
        }
        out[i] = StepAgreement { raw, scaled: group.density * raw, similarities };
    }
    Ok(out)
}

/// Normalized excess pre-answer length, `clamp((tokens - L) / L, 0, 1)`.
pub fn length_excess<T: Scalar>(pre_answer_tokens: usize, target: usize) -> T {
    let target = target.max(1);
    if pre_answer_tokens <= target {
        return T::zero();
    }
    let excess = T::of_count(pre_answer_tokens - target) / T::of_count(target);
    excess.min(T::one())
}

/// `p^alpha * (1 - eta * excess)`.
pub fn answer_reward<T: Scalar>(p: T, excess: T, alpha: T, eta_len: T) -> Result<T, RewardError> {
    if !(p > T::zero() && p <= T::one()) {
        return Err(invalid("p", "must lie in (0, 1]"));
    }
    if !(excess >= T::zero() && excess <= T::one()) {
        return Err(invalid("length_excess", "must lie in [0, 1]"));
    }
    if !(alpha > T::zero()) || !alpha.is_finite() {
        return Err(invalid("alpha", "must be positive"));
    }
    if !(eta_len >= T::zero()) || eta_len * excess > T::one() {
        return Err(invalid("eta_len", "must be non-negative with eta_len * excess <= 1"));
    }
    Ok(p.powf(alpha) * (T::one() - eta_len * excess))
}

/// Linear warmup-then-ramp weight on the step reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixSchedule<T> {
    pub warmup_steps: u64,
    pub ramp_steps: u64,
    pub lambda_max: T,
}

impl<T: Scalar> Default for MixSchedule<T> {
    fn default() -> Self {
        Self { warmup_steps: 20, ramp_steps: 150, lambda_max: T::of(0.7) }
    }
}

impl<T: Scalar> MixSchedule<T> {
    pub fn validate(&self) -> Result<(), RewardError> {
        if self.ramp_steps == 0 {
            return Err(invalid("ramp_steps", "must be at least 1"));
        }
        if !(self.lambda_max >= T::zero() && self.lambda_max <= T::one()) {
            return Err(invalid("lambda_max", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

pub fn lambda_at<T: Scalar>(t: u64, sched: &MixSchedule<T>) -> T {
    if t < sched.warmup_steps {
        return T::zero();
    }
    let progress = T::of((t - sched.warmup_steps) as f64) / T::of(sched.ramp_steps.max(1) as f64);
    sched.lambda_max * progress.min(T::one())
}

/// `(1 - lambda) * r_ans + lambda * r_step`.
pub fn mixed_reward<T: Scalar>(r_ans: T, r_step: T, lambda: T) -> T {
    (T::one() - lambda) * r_ans + lambda * r_step
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapingKind {
    /// `scale * exp(-(H - H*)^2 / (2 width^2))`
    #[default]
    Gaussian,
    /// `scale * max(0, 1 - |H - H*| / (2 width))`
    Tent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProposerShaping<T> {
    pub kind: ShapingKind,
    pub target_entropy: T,
    pub width: T,
    pub scale: T,
}

impl<T: Scalar> Default for ProposerShaping<T> {
    fn default() -> Self {
        Self {
            kind: ShapingKind::Gaussian,
            target_entropy: T::of(0.85),
            width: T::of(0.5),
            scale: T::of(0.5),
        }
    }
}

/// Entropy-shaped Proposer reward, peaking at the target entropy.
pub fn proposer_reward<T: Scalar>(entropy: T, shaping: &ProposerShaping<T>) -> T {
    let d = entropy - shaping.target_entropy;
    match shaping.kind {
        ShapingKind::Gaussian => {
            shaping.scale * (-(d * d) / (T::of(2.0) * shaping.width * shaping.width)).exp()
        }
        ShapingKind::Tent => {
            shaping.scale * (T::one() - d.abs() / (T::of(2.0) * shaping.width)).max(T::zero())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consensus::{dominant_group, empirical_distribution};
    use crate::embed::{hashed_embed, EmbedConfig};
    use crate::trace::{normalize_answer, ParsedRollout};
    use proptest::prelude::*;

    const TOL: f64 = 1e-9;

    #[test]
    fn weight_examples() {
        assert_eq!(position_weights(1, 0.7).unwrap().weights, vec![1.0]);
        let w = position_weights(3, 0.7f64).unwrap();
        // 1, 0.7, 0.49 normalized by 2.19
        let oracle = [1.0 / 2.19, 0.7 / 2.19, 0.49 / 2.19];
        for (a, b) in w.weights.iter().zip(oracle) {
            assert!((a - b).abs() < TOL);
        }
        assert!((w.weights[0] - 0.456_621_004_566_210_05).abs() < TOL);
        assert_eq!(w.at(4), 0.0);
        assert_eq!(w.at(0), 0.0);
        assert!(position_weights(3, 1.0f64).is_err());
        assert!(position_weights(3, 0.0f64).is_err());
        assert!(position_weights(0, 0.5f64).is_err());
    }

    proptest! {
        #[test]
        fn weights_decrease_and_sum_to_one(j_max in 1usize..40, delta in 0.01f64..0.99) {
            let w = position_weights(j_max, delta).unwrap();
            prop_assert!((w.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(w.weights.windows(2).all(|p| p[0] > p[1]));
        }

        #[test]
        fn answer_reward_is_increasing_in_p(p1 in 0.01f64..1.0, dp in 0.001f64..0.5, alpha in 0.1f64..4.0, ex in 0.0f64..1.0) {
            let p2 = (p1 + dp).min(1.0);
            prop_assume!(p2 > p1);
            let a = answer_reward(p1, ex, alpha, 0.1).unwrap();
            let b = answer_reward(p2, ex, alpha, 0.1).unwrap();
            prop_assert!(b > a);
        }

        #[test]
        fn lambda_is_monotone(w in 0u64..50, r in 1u64..100, t in 0u64..300) {
            let s = MixSchedule { warmup_steps: w, ramp_steps: r, lambda_max: 0.7 };
            let (a, b) = (lambda_at(t, &s), lambda_at(t + 1, &s));
            prop_assert!(b >= a);
            prop_assert!((0.0..=0.7).contains(&a));
        }

        #[test]
        fn tent_and_gaussian_are_symmetric(c in 0.0f64..0.8) {
            for kind in [ShapingKind::Gaussian, ShapingKind::Tent] {
                let s = ProposerShaping { kind, ..ProposerShaping::default() };
                let lo = proposer_reward(0.85 - c, &s);
                let hi = proposer_reward(0.85 + c, &s);
                prop_assert!((lo - hi).abs() < 1e-12);
                prop_assert!(lo >= 0.0 && lo <= 0.5);
            }
        }
    }

    #[test]
    fn length_excess_examples() {
        assert_eq!(length_excess::<f64>(50, 100), 0.0);
        assert_eq!(length_excess::<f64>(100, 100), 0.0);
        assert_eq!(length_excess::<f64>(200, 100), 1.0);
        assert_eq!(length_excess::<f64>(500, 100), 1.0);
        assert!((length_excess::<f64>(150, 100) - 0.5).abs() < TOL);
    }

    #[test]
    fn answer_reward_examples() {
        assert_eq!(answer_reward(1.0, 0.0, 2.0, 0.1).unwrap(), 1.0);
        assert!((answer_reward(0.6, 0.5, 2.0, 0.1).unwrap() - 0.342_f64).abs() < TOL);
        for p in [0.2, 0.4, 0.8] {
            assert_eq!(answer_reward(p, 0.7, 1.0, 0.0).unwrap(), p);
        }
        assert!(answer_reward(0.0, 0.0, 1.0, 0.0).is_err());
        assert!(answer_reward(0.5, 0.0, 0.0, 0.0).is_err());
        assert!(answer_reward(0.5, 1.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn lambda_examples() {
        let s = MixSchedule { warmup_steps: 20, ramp_steps: 100, lambda_max: 0.7 };
        assert_eq!(lambda_at(0, &s), 0.0);
        assert_eq!(lambda_at(19, &s), 0.0);
        assert_eq!(lambda_at(20, &s), 0.0);
        assert!((lambda_at(120, &s) - 0.7_f64).abs() < TOL);
        assert!((lambda_at(70, &s) - 0.35_f64).abs() < TOL);
        assert!((lambda_at(10_000, &s) - 0.7_f64).abs() < TOL);
        assert!(MixSchedule { ramp_steps: 0, ..s }.validate().is_err());
        assert!(MixSchedule { lambda_max: 1.2, ..s }.validate().is_err());
    }

    #[test]
    fn mixed_reward_examples() {
        assert_eq!(mixed_reward(0.3, 0.9, 0.0), 0.3);
        assert_eq!(mixed_reward(0.3, 0.9, 1.0), 0.9);
        assert!((mixed_reward(0.5, 0.8, 0.7) - 0.71_f64).abs() < TOL);
    }

    #[test]
    fn proposer_reward_examples() {
        let s = ProposerShaping::default();
        assert_eq!(proposer_reward(0.85, &s), 0.5);
        assert!((proposer_reward(0.0, &s) - 0.117_873_038_277_931_77_f64).abs() < TOL);
        let tent = ProposerShaping { kind: ShapingKind::Tent, ..s };
        assert_eq!(proposer_reward(0.85, &tent), 0.5);
        assert_eq!(proposer_reward(3.0, &tent), 0.0);
        assert!((proposer_reward(0.35, &tent) - 0.25_f64).abs() < TOL);
    }

    fn rollout(answer: &str, steps: &[&str]) -> ParsedRollout {
        ParsedRollout {
            steps: steps.iter().map(|s| s.to_string()).collect(),
            answer: normalize_answer(answer).unwrap(),
            raw_answer: answer.into(),
            pre_answer_tokens: 10,
        }
    }

    fn embed_all(batch: &[ParsedRollout]) -> Vec<Vec<StepEmbedding<f64>>> {
        let cfg = EmbedConfig::default();
        batch
            .iter()
            .map(|r| r.steps.iter().map(|s| hashed_embed(s, &cfg)).collect())
            .collect()
    }

    #[test]
    fn identical_traces_get_full_agreement() {
        let steps = ["read bar a", "read bar b", "add them"];
        let batch: Vec<_> = (0..5).map(|_| rollout("7", &steps)).collect();
        let dist = empirical_distribution(&batch).unwrap();
        let group = dominant_group(&batch, &dist, 0.0).unwrap();
        let w = position_weights(3, 0.7).unwrap();
        let scores = step_agreement_rewards(&group, &embed_all(&batch), &w).unwrap();
        for s in &scores {
            assert!((s.scaled - 1.0).abs() < TOL);
        }
        // shorter than the budget: sum of the used weights
        let w8 = position_weights(8, 0.7).unwrap();
        let scores = step_agreement_rewards(&group, &embed_all(&batch), &w8).unwrap();
        let expected: f64 = w8.weights[..3].iter().sum();
        assert!((scores[0].scaled - expected).abs() < TOL);
    }

    #[test]
    fn singleton_group_scaled_by_density() {
        let steps = ["one", "two", "three", "four"];
        let batch = vec![
            rollout("a", &steps),
            rollout("b", &["q"]),
            rollout("c", &["r"]),
            rollout("d", &["s"]),
            rollout("e", &["t"]),
        ];
        let dist = empirical_distribution(&batch).unwrap();
        let group = dominant_group(&batch, &dist, 0.5).unwrap();
        assert_eq!(group.member_indices, vec![0]);
        let w = position_weights(4, 0.7).unwrap();
        let scores = step_agreement_rewards(&group, &embed_all(&batch), &w).unwrap();
        assert!((scores[0].raw - 1.0).abs() < TOL);
        assert!((scores[0].scaled - 0.447_213_595_499_957_94).abs() < TOL);
        for s in &scores[1..] {
            assert_eq!(s.scaled, 0.0);
            assert!(s.similarities.is_empty());
        }
    }

    #[test]
    fn empty_trace_member_scores_zero() {
        let batch = vec![rollout("a", &[]), rollout("a", &["s1", "s2"]), rollout("a", &["s1", "s2"])];
        let dist = empirical_distribution(&batch).unwrap();
        let group = dominant_group(&batch, &dist, 0.5).unwrap();
        let w = position_weights(8, 0.7).unwrap();
        let scores = step_agreement_rewards(&group, &embed_all(&batch), &w).unwrap();
        assert_eq!(scores[0].raw, 0.0);
        assert!(scores[1].raw > 0.0);
    }

    #[test]
    fn divergent_member_scores_lowest() {
        let grounded = ["read the red bar value twelve", "read the blue bar value thirty", "add twelve and thirty", "total is forty two"];
        let shortcut = ["read the red bar value twelve", "legend colors look seasonal", "the title mentions revenue growth", "total is forty two"];
        let mut batch: Vec<_> = (0..4).map(|_| rollout("42", &grounded)).collect();
        batch.insert(2, rollout("42", &shortcut));
        let dist = empirical_distribution(&batch).unwrap();
        let group = dominant_group(&batch, &dist, 0.5).unwrap();
        let w = position_weights(8, 0.7).unwrap();
        let scores = step_agreement_rewards(&group, &embed_all(&batch), &w).unwrap();
        for (i, s) in scores.iter().enumerate() {
            if i != 2 {
                assert!(s.scaled > scores[2].scaled);
            }
        }
    }

    #[test]
    fn scaling_embeddings_changes_nothing() {
        let batch: Vec<_> = ["a b", "a c", "b c"].iter().map(|s| rollout("1", &[s, "x y"])).collect();
        let dist = empirical_distribution(&batch).unwrap();
        let group = dominant_group(&batch, &dist, 0.5).unwrap();
        let w = position_weights(2, 0.7).unwrap();
        let emb = embed_all(&batch);
        let scaled: Vec<Vec<StepEmbedding<f64>>> = emb
            .iter()
            .map(|steps| steps.iter().map(|e| StepEmbedding(e.0.iter().map(|x| 3.5 * x).collect())).collect())
            .collect();
        let a = step_agreement_rewards(&group, &emb, &w).unwrap();
        let b = step_agreement_rewards(&group, &scaled, &w).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.scaled - y.scaled).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_member_embeddings_is_an_error() {
        let batch = vec![rollout("a", &["s"]), rollout("a", &["s"])];
        let dist = empirical_distribution(&batch).unwrap();
        let group = dominant_group(&batch, &dist, 0.5).unwrap();
        let w = position_weights(2, 0.7).unwrap();
        let emb = embed_all(&batch[..1]);
        assert_eq!(step_agreement_rewards(&group, &emb, &w), Err(RewardError::MissingEmbeddings(1)));
    }
}
