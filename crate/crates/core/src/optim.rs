//! KL-regularized REINFORCE over categorical policies, EMA baselines, and
//! the multiplicative KL-coefficient controller.
//!
//! Gradients are gradients of the *loss* (to be descended):
//!
//! ```text
//! L(z) = -(1/|S|) sum_s (r_s - b) log pi_z(a_s) + beta * KL(pi_z || pi_ref)
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum OptimError {
    #[error("action {action} out of range for {k} actions")]
    ActionOutOfRange { action: usize, k: usize },
    #[error("policies have different action counts: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("sample batch is empty")]
    EmptySamples,
    #[error("learning rate must be positive")]
    InvalidLearningRate,
}

/// Softmax policy over `K` discrete actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalPolicy<T> {
    logits: Vec<T>,
}

impl<T: Scalar> CategoricalPolicy<T> {
    /// Panics on an empty logit vector.
    pub fn new(logits: Vec<T>) -> Self {
        assert!(!logits.is_empty(), "a policy needs at least one action");
        Self { logits }
    }

    pub fn uniform(k: usize) -> Self {
        Self::new(vec![T::zero(); k])
    }

    pub fn logits(&self) -> &[T] {
        &self.logits
    }

    pub fn num_actions(&self) -> usize {
        self.logits.len()
    }

    fn max_logit(&self) -> T {
        self.logits.iter().copied().fold(T::neg_infinity(), T::max)
    }

    fn log_normalizer(&self) -> T {
        let m = self.max_logit();
        m + self.logits.iter().map(|&z| (z - m).exp()).sum::<T>().ln()
    }

    pub fn probs(&self) -> Vec<T> {
        let m = self.max_logit();
        let exps: Vec<T> = self.logits.iter().map(|&z| (z - m).exp()).collect();
        let total: T = exps.iter().copied().sum();
        exps.into_iter().map(|e| e / total).collect()
    }

    pub fn log_probs(&self) -> Vec<T> {
        let lz = self.log_normalizer();
        self.logits.iter().map(|&z| z - lz).collect()
    }

    pub fn log_prob(&self, action: usize) -> Result<T, OptimError> {
        let z = *self
            .logits
            .get(action)
            .ok_or(OptimError::ActionOutOfRange { action, k: self.logits.len() })?;
        Ok(z - self.log_normalizer())
    }

    /// Inverse-CDF sample with one uniform draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let probs = self.probs();
        for (a, p) in probs.iter().enumerate() {
            acc += p.to_f64_lossy();
            if u < acc {
                return a;
            }
        }
        probs.len() - 1
    }

    fn apply(&mut self, grad: &[T], lr: T) {
        self.logits.iter_mut().zip(grad).for_each(|(z, &g)| *z -= lr * g);
    }
}

/// Loss-gradient of the REINFORCE term with respect to the logits:
/// `(1/|S|) sum_s (r_s - b) (softmax(z) - onehot(a_s))`.
pub fn reinforce_grad<T: Scalar>(
    policy: &CategoricalPolicy<T>,
    samples: &[(usize, T)],
    baseline: T,
) -> Result<Vec<T>, OptimError> {
    if samples.is_empty() {
        return Err(OptimError::EmptySamples);
    }
    let k = policy.num_actions();
    let probs = policy.probs();
    let mut grad = vec![T::zero(); k];
    for &(action, reward) in samples {
        if action >= k {
            return Err(OptimError::ActionOutOfRange { action, k });
        }
        let adv = reward - baseline;
        for (g, &p) in grad.iter_mut().zip(&probs) {
            *g += adv * p;
        }
        grad[action] -= adv;
    }
    let n = T::of_count(samples.len());
    grad.iter_mut().for_each(|g| *g /= n);
    Ok(grad)
}

/// Expected REINFORCE loss-gradient under the policy's own sampling
/// distribution, for a deterministic per-action reward table.
pub fn expected_reinforce_grad<T: Scalar>(
    policy: &CategoricalPolicy<T>,
    rewards: &[T],
    baseline: T,
) -> Result<Vec<T>, OptimError> {
    let k = policy.num_actions();
    if rewards.len() != k {
        return Err(OptimError::DimensionMismatch(k, rewards.len()));
    }
    let probs = policy.probs();
    let mut grad = vec![T::zero(); k];
    for (a, (&pa, &r)) in probs.iter().zip(rewards).enumerate() {
        let single = reinforce_grad(policy, &[(a, r)], baseline)?;
        grad.iter_mut().zip(single).for_each(|(g, s)| *g += pa * s);
    }
    Ok(grad)
}

/// `KL(p || q) = sum_a p(a) ln(p(a) / q(a))`.
pub fn kl_categorical<T: Scalar>(p: &CategoricalPolicy<T>, q: &CategoricalPolicy<T>) -> Result<T, OptimError> {
    if p.num_actions() != q.num_actions() {
        return Err(OptimError::DimensionMismatch(p.num_actions(), q.num_actions()));
    }
    let (lp, lq) = (p.log_probs(), q.log_probs());
    let kl: T = p
        .probs()
        .iter()
        .zip(lp.iter().zip(&lq))
        .map(|(&pa, (&a, &b))| pa * (a - b))
        .sum();
    Ok(kl.max(T::zero()))
}

/// Gradient of `KL(pi_z || q)` with respect to the logits `z`:
/// `p_k (ln p_k - ln q_k - KL)`.
pub fn kl_grad<T: Scalar>(p: &CategoricalPolicy<T>, q: &CategoricalPolicy<T>) -> Result<Vec<T>, OptimError> {
    if p.num_actions() != q.num_actions() {
        return Err(OptimError::DimensionMismatch(p.num_actions(), q.num_actions()));
    }
    let (lp, lq, probs) = (p.log_probs(), q.log_probs(), p.probs());
    let kl: T = probs.iter().zip(lp.iter().zip(&lq)).map(|(&pa, (&a, &b))| pa * (a - b)).sum();
    Ok(probs
        .iter()
        .zip(lp.iter().zip(&lq))
        .map(|(&pa, (&a, &b))| pa * (a - b - kl))
        .collect())
}

/// Exponential moving average of batch-mean rewards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmaBaseline<T> {
    pub value: T,
    pub momentum: T,
    pub initialized: bool,
}

impl<T: Scalar> EmaBaseline<T> {
    pub fn new(momentum: T) -> Self {
        Self { value: T::zero(), momentum, initialized: false }
    }

    /// First call adopts the batch mean; later calls blend it in with `momentum`.
    pub fn update(&mut self, batch_mean: T) {
        if self.initialized {
            self.value = (T::one() - self.momentum) * self.value + self.momentum * batch_mean;
        } else {
            self.value = batch_mean;
            self.initialized = true;
        }
    }
}

pub fn update_baseline<T: Scalar>(mut baseline: EmaBaseline<T>, batch_mean: T) -> EmaBaseline<T> {
    baseline.update(batch_mean);
    baseline
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KlController<T> {
    pub beta: T,
    pub target: T,
    pub eta_ctrl: T,
    pub beta_min: T,
    pub beta_max: T,
}

impl<T: Scalar> Default for KlController<T> {
    fn default() -> Self {
        Self {
            beta: T::of(0.1),
            target: T::of(0.05),
            eta_ctrl: T::of(0.1),
            beta_min: T::of(1e-3),
            beta_max: T::of(10.0),
        }
    }
}

impl<T: Scalar> KlController<T> {
    /// `beta <- clip(beta * exp(eta * (KL - tau) / tau), beta_min, beta_max)`
    pub fn adapt(&mut self, observed_kl: T) {
        let factor = (self.eta_ctrl * (observed_kl - self.target) / self.target).exp();
        self.beta = (self.beta * factor).max(self.beta_min).min(self.beta_max);
    }
}

pub fn adapt_beta<T: Scalar>(mut controller: KlController<T>, observed_kl: T) -> KlController<T> {
    controller.adapt(observed_kl);
    controller
}

/// What one [`regularized_step`] did.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepReport<T> {
    pub kl_before: T,
    pub kl_after: T,
    /// Coefficient used for this update (before adaptation).
    pub beta_used: T,
    pub batch_mean_reward: T,
}

/// One KL-regularized REINFORCE update, in order: descend the combined
/// loss-gradient using the current baseline and beta, fold the batch mean
/// into the baseline, then adapt beta with the post-update KL.
pub fn regularized_step<T: Scalar>(
    policy: &mut CategoricalPolicy<T>,
    ref_policy: &CategoricalPolicy<T>,
    samples: &[(usize, T)],
    baseline: &mut EmaBaseline<T>,
    controller: &mut KlController<T>,
    lr: T,
) -> Result<StepReport<T>, OptimError> {
    if !(lr > T::zero()) {
        return Err(OptimError::InvalidLearningRate);
    }
    let kl_before = kl_categorical(policy, ref_policy)?;
    let mut grad = reinforce_grad(policy, samples, baseline.value)?;
    let kl_g = kl_grad(policy, ref_policy)?;
    let beta_used = controller.beta;
    grad.iter_mut().zip(kl_g).for_each(|(g, k)| *g += beta_used * k);
    policy.apply(&grad, lr);

    let batch_mean = samples.iter().map(|&(_, r)| r).sum::<T>() / T::of_count(samples.len());
    baseline.update(batch_mean);
    let kl_after = kl_categorical(policy, ref_policy)?;
    controller.adapt(kl_after);
    Ok(StepReport { kl_before, kl_after, beta_used, batch_mean_reward: batch_mean })
}
