//! Seeded batches with one shortcut member, shared by tests, the service
//! examples and the acceptance suite.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::generators::{generate_rollout, Generator, NoiseRates};
use super::scene::{generate_scene, Scene};

/// Five rollouts to one scene, all reaching the scene solution: four
/// grounded traces and one shortcut trace whose steps 2-3 are unrelated
/// claims.
#[derive(Debug, Clone)]
pub struct ShortcutBatch {
    pub scene: Scene,
    pub texts: Vec<String>,
    /// Batch position of the shortcut rollout.
    pub shortcut: usize,
}

pub const FIXTURE_SIZE: usize = 5;

pub fn shortcut_batch(seed: u64, paraphrase_noise: f64) -> ShortcutBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xf1a7_c0de);
    let difficulty = rng.random_range(1..=5u8);
    let scene = generate_scene(&mut rng, seed as usize, difficulty);
    let shortcut = rng.random_range(0..FIXTURE_SIZE);
    let noise = NoiseRates { paraphrase: paraphrase_noise, offmode: 0.0 };
    let texts = (0..FIXTURE_SIZE)
        .map(|k| {
            let g = if k == shortcut { Generator::Shortcut } else { Generator::Grounded };
            generate_rollout(g, &scene, noise, "", &mut rng)
        })
        .collect();
    ShortcutBatch { scene, texts, shortcut }
}
