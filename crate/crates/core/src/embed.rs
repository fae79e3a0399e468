//! Step embeddings, dominant-group prototypes, and cosine agreement.
//!
//! The default embedder is a seeded feature-hashing model: every token maps
//! to a fixed pseudo-random unit direction, and a step is the normalized mean
//! of its token directions. Anything implementing [`Embedder`] can replace it.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::scalar::{dot, norm, Scalar};

/// Norms below this are treated as zero by [`cosine`].
pub const ZERO_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum EmbedError {
    #[error("vector dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("prototype group is empty")]
    EmptyGroup,
}

/// Unit vector, or the zero vector for empty text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StepEmbedding<T>(pub Vec<T>);

impl<T: Scalar> StepEmbedding<T> {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![T::zero(); dim])
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|x| x.is_zero())
    }

    pub fn norm(&self) -> T {
        norm(&self.0)
    }
}

/// Text-to-vector port. Implementations must be deterministic: the same
/// text under the same configuration yields a bit-identical vector.
pub trait Embedder<T: Scalar>: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> StepEmbedding<T>;

    fn embed_steps(&self, steps: &[String]) -> Vec<StepEmbedding<T>> {
        steps.iter().map(|s| self.embed(s)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedConfig {
    pub dim: usize,
    pub token_budget: usize,
    pub seed: u64,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self { dim: 256, token_budget: 64, seed: 0 }
    }
}

/// Feature-hashing embedder with a memo of token directions.
pub struct HashedEmbedder {
    cfg: EmbedConfig,
    cache: Mutex<HashMap<String, Arc<[f64]>>>,
}

impl std::fmt::Debug for HashedEmbedder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HashedEmbedder").field("cfg", &self.cfg).finish()
    }
}

impl HashedEmbedder {
    /// Panics if `dim < 2` or `token_budget == 0`.
    pub fn new(cfg: EmbedConfig) -> Self {
        assert!(cfg.dim >= 2, "embedding dimension must be at least 2");
        assert!(cfg.token_budget >= 1, "token budget must be positive");
        Self { cfg, cache: Mutex::new(HashMap::new()) }
    }

    pub fn config(&self) -> &EmbedConfig {
        &self.cfg
    }

    fn token_direction(&self, token: &str) -> Arc<[f64]> {
        if let Some(v) = self.cache.lock().expect("embedder cache poisoned").get(token) {
            return v.clone();
        }
        let v: Arc<[f64]> = token_direction(token, self.cfg.dim, self.cfg.seed).into();
        self.cache
            .lock()
            .expect("embedder cache poisoned")
            .insert(token.to_string(), v.clone());
        v
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Pseudo-random isotropic unit vector keyed by `(token, seed)`.
fn token_direction(token: &str, dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(fnv1a64(token.as_bytes()) ^ splitmix64(seed));
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > ZERO_NORM {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

impl<T: Scalar> Embedder<T> for HashedEmbedder {
    fn dim(&self) -> usize {
        self.cfg.dim
    }

    fn embed(&self, text: &str) -> StepEmbedding<T> {
        let lowered = text.to_lowercase();
        let mut acc = vec![0.0f64; self.cfg.dim];
        let mut any = false;
        for token in lowered.split_whitespace().take(self.cfg.token_budget) {
            any = true;
            let dir = self.token_direction(token);
            acc.iter_mut().zip(dir.iter()).for_each(|(a, d)| *a += d);
        }
        let n = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !any || n < ZERO_NORM {
            return StepEmbedding::zeros(self.cfg.dim);
        }
        StepEmbedding(acc.into_iter().map(|x| T::of(x / n)).collect())
    }
}

/// `hashed_embed` as a free function, without memoization.
pub fn hashed_embed<T: Scalar>(text: &str, cfg: &EmbedConfig) -> StepEmbedding<T> {
    HashedEmbedder::new(*cfg).embed(text)
}

/// Mean of the dominant group's step-`j` embeddings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepPrototype<T> {
    /// 1-based step position.
    pub index: usize,
    /// Plain mean, not re-normalized.
    pub vector: Vec<T>,
    /// Number of non-zero embeddings averaged; 0 means the prototype is unusable.
    pub support: usize,
}

/// One prototype per step position `1..=max J_i`, in increasing order.
///
/// `group_steps[k]` holds the step embeddings of the k-th group member. Zero
/// embeddings are left out of the mean.
pub fn prototypes<T: Scalar>(group_steps: &[Vec<StepEmbedding<T>>]) -> Result<Vec<StepPrototype<T>>, EmbedError> {
    if group_steps.is_empty() {
        return Err(EmbedError::EmptyGroup);
    }
    let dim = group_steps
        .iter()
        .flatten()
        .map(StepEmbedding::dim)
        .next()
        .unwrap_or(0);
    let max_len = group_steps.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = Vec::with_capacity(max_len);
    for j in 0..max_len {
        let mut sum = vec![T::zero(); dim];
        let mut support = 0usize;
        for e in group_steps.iter().filter_map(|steps| steps.get(j)) {
            if e.dim() != dim {
                return Err(EmbedError::DimensionMismatch(dim, e.dim()));
            }
            if e.is_zero() {
                continue;
            }
            support += 1;
            sum.iter_mut().zip(e.as_slice()).for_each(|(s, &x)| *s += x);
        }
        if support > 0 {
            let k = T::of_count(support);
            sum.iter_mut().for_each(|s| *s /= k);
        }
        out.push(StepPrototype { index: j + 1, vector: sum, support });
    }
    Ok(out)
}

/// Cosine similarity, clamped to `[-1, 1]`; 0 when either side is (near) zero.
pub fn cosine<T: Scalar>(a: &[T], b: &[T]) -> Result<T, EmbedError> {
    if a.len() != b.len() {
        return Err(EmbedError::DimensionMismatch(a.len(), b.len()));
    }
    let (na, nb) = (norm(a), norm(b));
    let eps = T::of(ZERO_NORM);
    if na < eps || nb < eps {
        return Ok(T::zero());
    }
    Ok((dot(a, b) / (na * nb)).max(-T::one()).min(T::one()))
}
