//! Proposer/Solver self-play simulator.
//!
//! The Proposer picks a difficulty level for each scene; the Solver picks one
//! of three trace generators per rollout. Rollouts are scored exactly as the
//! library scores real text, and both learners take KL-regularized REINFORCE
//! steps. Everything is seeded, so a seed fixes the whole metrics stream.

pub mod fixtures;
pub mod generators;
pub mod scene;

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use fixtures::{shortcut_batch, ShortcutBatch, FIXTURE_SIZE};
pub use generators::{generate_rollout, paraphrase, unrelated_claim, Generator, NoiseRates};
pub use scene::{generate_bank, generate_scene, Scene, SceneError};

use crate::config::{Config, ConfigError, LearnerConfig};
use crate::embed::HashedEmbedder;
use crate::optim::{regularized_step, CategoricalPolicy, EmaBaseline, KlController, OptimError};
use crate::reward::{lambda_at, proposer_reward};
use crate::scoring::{score_batch, ScoreError};
use crate::trace::normalize_answer;

/// Number of Proposer difficulty levels.
pub const LEVELS: usize = 5;

/// Trailing window of the running-mean entropy reported in run summaries.
pub const ENTROPY_WINDOW: usize = 20;

#[derive(Debug, thiserror::Error)]
pub enum SelfPlayError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("cannot read scene bank: {0}")]
    SceneBank(String),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Optim(#[from] OptimError),
}

/// One trainable categorical policy with its frozen reference, baseline and
/// KL controller.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    pub policy: CategoricalPolicy<f64>,
    ref_policy: CategoricalPolicy<f64>,
    pub baseline: EmaBaseline<f64>,
    pub controller: KlController<f64>,
}

impl LearnerState {
    pub fn new(actions: usize, cfg: &LearnerConfig) -> Self {
        let policy = CategoricalPolicy::uniform(actions);
        Self {
            ref_policy: policy.clone(),
            policy,
            baseline: EmaBaseline::new(cfg.ema_momentum),
            controller: cfg.controller,
        }
    }

    /// Starts from `policy`, which also becomes the frozen reference.
    pub fn from_policy(policy: CategoricalPolicy<f64>, cfg: &LearnerConfig) -> Self {
        Self {
            ref_policy: policy.clone(),
            policy,
            baseline: EmaBaseline::new(cfg.ema_momentum),
            controller: cfg.controller,
        }
    }

    pub fn ref_policy(&self) -> &CategoricalPolicy<f64> {
        &self.ref_policy
    }

    fn step(&mut self, samples: &[(usize, f64)], lr: f64) -> Result<(), OptimError> {
        regularized_step(&mut self.policy, &self.ref_policy, samples, &mut self.baseline, &mut self.controller, lr)?;
        Ok(())
    }
}

/// Solver over [`Generator`]s, Proposer over difficulty levels 1..=5.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfPlayState {
    pub solver: LearnerState,
    pub proposer: LearnerState,
    /// Proposer samples awaiting the next periodic update.
    pub pending: Vec<(usize, f64)>,
}

impl SelfPlayState {
    pub fn new(cfg: &Config) -> Self {
        Self {
            solver: LearnerState::new(Generator::ALL.len(), &cfg.solver),
            proposer: LearnerState::new(LEVELS, &cfg.proposer),
            pending: Vec::new(),
        }
    }

    pub fn solver_probs(&self) -> [f64; 3] {
        let p = self.solver.policy.probs();
        [p[0], p[1], p[2]]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: u64,
    pub scene_id: String,
    /// Proposer level in 1..=5.
    pub difficulty: u8,
    pub proposer_reward: f64,
    pub answer_entropy: f64,
    /// Dominant group size over the number of rollouts.
    pub majority_density: f64,
    pub mean_step_similarity: f64,
    pub group_size: usize,
    pub valid_step_positions: usize,
    pub lambda: f64,
    pub beta_s: f64,
    pub beta_p: f64,
    pub mean_r_ans: f64,
    pub mean_r_step: f64,
    pub mean_r_sol: f64,
    /// Fraction of rollouts matching the scene label; absent for unlabeled scenes.
    pub eval_accuracy: Option<f64>,
    pub p_grounded: f64,
    pub p_shortcut: f64,
    pub p_offmode: f64,
    pub proposer_updated: bool,
}

fn mix_seed(seed: u64, t: u64) -> u64 {
    let mut z = seed ^ t.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One self-play iteration on `scene` at training step `t`.
pub fn run_iteration(
    state: &mut SelfPlayState,
    scene: &Scene,
    t: u64,
    config: &Config,
    embedder: &HashedEmbedder,
    rng_seed: u64,
) -> Result<IterationRecord, SelfPlayError> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let sim = &config.simulator;

    let level = state.proposer.policy.sample(&mut rng);
    let _question = format!("{} [difficulty {}]", scene.question, level + 1);
    let slip = sim.slip_profile[level];

    let mut distractors = scene.distractor_answers.clone();
    distractors.shuffle(&mut rng);
    let noise = NoiseRates { paraphrase: sim.paraphrase_noise, offmode: sim.offmode_noise };

    let mut actions = Vec::with_capacity(sim.rollouts);
    let mut texts = Vec::with_capacity(sim.rollouts);
    let mut offmode_drawn = 0;
    for _ in 0..sim.rollouts {
        let chosen = state.solver.policy.sample(&mut rng);
        // a slip is environment noise: the chosen generator still takes the credit
        let slipped = slip > 0.0 && rng.random_bool(slip);
        let generator = if slipped { Generator::Offmode } else { Generator::from_index(chosen).expect("three actions") };
        let off = &distractors[offmode_drawn % distractors.len()];
        if generator == Generator::Offmode {
            offmode_drawn += 1;
        }
        actions.push(chosen);
        texts.push(generate_rollout(generator, scene, noise, off, &mut rng));
    }

    let lambda = lambda_at(t, &config.schedule);
    let score = score_batch(&texts, &config.parse, &config.reward, lambda, embedder)?;

    let mut rewards = vec![0.0; texts.len()];
    for b in &score.breakdowns {
        rewards[b.index] = b.r_sol;
    }
    let samples: Vec<(usize, f64)> = actions.iter().copied().zip(rewards).collect();
    state.solver.step(&samples, config.solver.lr)?;

    let g = proposer_reward(score.entropy, &config.shaping);
    state.pending.push((level, g));
    let proposer_updated = (t + 1) % config.proposer.update_every as u64 == 0;
    if proposer_updated {
        let pending = std::mem::take(&mut state.pending);
        state.proposer.step(&pending, config.proposer.lr)?;
    }

    let n = score.breakdowns.len() as f64;
    let mean = |f: fn(&crate::scoring::RewardBreakdown<f64>) -> f64| score.breakdowns.iter().map(f).sum::<f64>() / n;
    let eval_accuracy = scene.latent_answer.as_ref().map(|label| {
        let Ok(label) = normalize_answer(label) else { return 0.0 };
        score.breakdowns.iter().filter(|b| b.answer == label.as_str()).count() as f64 / texts.len() as f64
    });
    let [p_grounded, p_shortcut, p_offmode] = state.solver_probs();
    Ok(IterationRecord {
        t,
        scene_id: scene.scene_id.clone(),
        difficulty: level as u8 + 1,
        proposer_reward: g,
        answer_entropy: score.entropy,
        majority_density: score.group_fraction,
        mean_step_similarity: score.mean_step_similarity(),
        group_size: score.group_indices.len(),
        valid_step_positions: score.valid_step_positions(),
        lambda,
        beta_s: state.solver.controller.beta,
        beta_p: state.proposer.controller.beta,
        mean_r_ans: mean(|b| b.r_ans),
        mean_r_step: mean(|b| b.r_step),
        mean_r_sol: mean(|b| b.r_sol),
        eval_accuracy,
        p_grounded,
        p_shortcut,
        p_offmode,
        proposer_updated,
    })
}

/// Scene bank from the configured JSON file, or generated from `seed`.
pub fn load_scene_bank(config: &Config, seed: u64) -> Result<Vec<Scene>, SelfPlayError> {
    let bank = match &config.simulator.scene_bank {
        Some(path) => read_scene_bank(path)?,
        None => generate_bank(config.simulator.scene_bank_size, seed),
    };
    if bank.is_empty() {
        return Err(SceneError::EmptyBank.into());
    }
    for s in &bank {
        s.validate(config.parse.max_steps)?;
    }
    Ok(bank)
}

pub fn read_scene_bank(path: &Path) -> Result<Vec<Scene>, SelfPlayError> {
    let text = std::fs::read_to_string(path).map_err(|e| SelfPlayError::SceneBank(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| SelfPlayError::SceneBank(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone)]
pub struct TrainingLog {
    pub seed: u64,
    pub config_hash: String,
    pub records: Vec<IterationRecord>,
    pub state: SelfPlayState,
}

impl TrainingLog {
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn summary(&self, warmup_steps: u64) -> RunSummary {
        RunSummary::from_records(&self.records, warmup_steps)
    }
}

/// Runs `config.simulator.steps` iterations over a seeded scene bank.
pub fn run_training(config: &Config, seed: u64) -> Result<TrainingLog, SelfPlayError> {
    config.validate()?;
    let bank = load_scene_bank(config, seed)?;
    run_training_on(config, seed, &bank)
}

/// As [`run_training`] with an explicit scene bank.
pub fn run_training_on(config: &Config, seed: u64, bank: &[Scene]) -> Result<TrainingLog, SelfPlayError> {
    config.validate()?;
    if bank.is_empty() {
        return Err(SceneError::EmptyBank.into());
    }
    let embedder = HashedEmbedder::new(config.embed.clone());
    let mut state = SelfPlayState::new(config);
    let mut records = Vec::with_capacity(config.simulator.steps as usize);
    for t in 0..config.simulator.steps {
        let scene = &bank[(t % bank.len() as u64) as usize];
        records.push(run_iteration(&mut state, scene, t, config, &embedder, mix_seed(seed, t))?);
    }
    Ok(TrainingLog { seed, config_hash: config.hash(), records, state })
}

/// Headline numbers of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps: usize,
    pub density_first: f64,
    pub density_last: f64,
    pub similarity_first: f64,
    pub similarity_last: f64,
    pub final_p_grounded: f64,
    pub final_p_shortcut: f64,
    pub final_p_offmode: f64,
    /// Largest |P(grounded) - P(shortcut)| over the run.
    pub max_abs_gap: f64,
    /// Post-warmup fraction of steps whose running-mean entropy lies in [0.3, 1.4].
    pub entropy_in_wide_band: f64,
    /// Same for [0.6, 1.1].
    pub entropy_in_narrow_band: f64,
    pub mean_proposer_reward: f64,
}

impl RunSummary {
    pub fn from_records(records: &[IterationRecord], warmup_steps: u64) -> Self {
        let n = records.len();
        let fifth = (n / 5).max(1);
        let mean = |xs: &[IterationRecord], f: fn(&IterationRecord) -> f64| {
            if xs.is_empty() {
                0.0
            } else {
                xs.iter().map(f).sum::<f64>() / xs.len() as f64
            }
        };
        let head = &records[..fifth.min(n)];
        let tail = &records[n.saturating_sub(fifth)..];
        let running = running_mean(&records.iter().map(|r| r.answer_entropy).collect::<Vec<_>>(), ENTROPY_WINDOW);
        let post: Vec<f64> = records.iter().zip(&running).filter(|(r, _)| r.t >= warmup_steps).map(|(_, &h)| h).collect();
        let frac = |lo: f64, hi: f64| {
            if post.is_empty() {
                0.0
            } else {
                post.iter().filter(|h| (lo..=hi).contains(*h)).count() as f64 / post.len() as f64
            }
        };
        let last = records.last();
        Self {
            steps: n,
            density_first: mean(head, |r| r.majority_density),
            density_last: mean(tail, |r| r.majority_density),
            similarity_first: mean(head, |r| r.mean_step_similarity),
            similarity_last: mean(tail, |r| r.mean_step_similarity),
            final_p_grounded: last.map_or(0.0, |r| r.p_grounded),
            final_p_shortcut: last.map_or(0.0, |r| r.p_shortcut),
            final_p_offmode: last.map_or(0.0, |r| r.p_offmode),
            max_abs_gap: records.iter().map(|r| (r.p_grounded - r.p_shortcut).abs()).fold(0.0, f64::max),
            entropy_in_wide_band: frac(0.3, 1.4),
            entropy_in_narrow_band: frac(0.6, 1.1),
            mean_proposer_reward: mean(records, |r| r.proposer_reward),
        }
    }
}

/// Trailing mean over at most `window` values ending at each position.
pub fn running_mean(xs: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    for i in 0..xs.len() {
        acc += xs[i];
        if i >= window {
            acc -= xs[i - window];
        }
        out.push(acc / (i + 1).min(window) as f64);
    }
    out
}
