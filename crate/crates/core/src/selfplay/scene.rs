//! Synthetic chart scenes standing in for unlabeled images.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub scene_id: String,
    /// Evaluation label. Never read by any reward or update.
    pub latent_answer: Option<String>,
    /// The answer the grounded trace arrives at; part of the scene content.
    pub solution: String,
    /// Step templates of the grounded trace, in order.
    pub canonical_steps: Vec<String>,
    pub distractor_answers: Vec<String>,
    /// 1..=5; sets the length of the grounded trace.
    pub difficulty: u8,
    /// Short question stem the Proposer decorates with a difficulty tag.
    pub question: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SceneError {
    #[error("scene bank is empty")]
    EmptyBank,
    #[error("scene {id}: {reason}")]
    Invalid { id: String, reason: String },
}

impl Scene {
    pub fn validate(&self, max_steps: usize) -> Result<(), SceneError> {
        let fail = |reason: &str| Err(SceneError::Invalid { id: self.scene_id.clone(), reason: reason.into() });
        if self.canonical_steps.is_empty() || self.canonical_steps.len() > max_steps {
            return fail("canonical_steps length must lie in [1, max_steps]");
        }
        if !(1..=5).contains(&self.difficulty) {
            return fail("difficulty must lie in 1..=5");
        }
        if self.distractor_answers.is_empty() {
            return fail("at least one distractor answer is required");
        }
        if self.distractor_answers.contains(&self.solution) {
            return fail("solution must not be a distractor");
        }
        if let Some(label) = &self.latent_answer {
            if self.distractor_answers.contains(label) {
                return fail("latent_answer must not be a distractor");
            }
        }
        if self.canonical_steps.iter().any(|s| s.trim().is_empty()) {
            return fail("canonical steps must be non-empty");
        }
        Ok(())
    }

    /// Copy without the evaluation label.
    pub fn scrubbed(&self) -> Scene {
        Scene { latent_answer: None, ..self.clone() }
    }
}

const CHARTS: &[&str] = &["bar chart", "column chart", "stacked chart", "grouped chart"];
const TOPICS: &[&str] = &["sales", "rainfall", "enrollment", "exports", "visitors", "energy use", "revenue", "traffic"];
const LABELS: &[&str] = &["north", "south", "east", "west", "alpha", "beta", "gamma", "delta", "spring", "autumn"];

#[derive(Clone, Copy)]
enum Op {
    Sum,
    Difference,
    Max,
}

impl Op {
    fn name(self) -> &'static str {
        match self {
            Op::Sum => "sum",
            Op::Difference => "difference",
            Op::Max => "larger value",
        }
    }

    fn apply(self, a: i64, b: i64) -> i64 {
        match self {
            Op::Sum => a + b,
            Op::Difference => (a - b).abs(),
            Op::Max => a.max(b),
        }
    }
}

/// One procedurally generated scene; `difficulty` controls trace length
/// (`3 + difficulty` steps).
pub fn generate_scene<R: Rng + ?Sized>(rng: &mut R, index: usize, difficulty: u8) -> Scene {
    let chart = CHARTS[rng.random_range(0..CHARTS.len())];
    let topic = TOPICS[rng.random_range(0..TOPICS.len())];
    let mut labels: Vec<&str> = LABELS.to_vec();
    labels.shuffle(rng);
    let op = [Op::Sum, Op::Difference, Op::Max][rng.random_range(0..3)];
    let (a, b) = loop {
        let (a, b) = (rng.random_range(3..90i64), rng.random_range(3..90i64));
        if a != b {
            break (a, b);
        }
    };
    let answer = op.apply(a, b);
    let (la, lb) = (labels[0], labels[1]);

    let total_steps = 3 + usize::from(difficulty);
    let extra_reads = total_steps - 4;
    let mut steps = vec![
        format!("locate the {chart} of {topic} and find the bars for {la} and {lb}"),
        format!("read the bar for {la} which reaches the value {a} on the vertical axis"),
        format!("read the bar for {lb} which reaches the value {b} on the vertical axis"),
    ];
    for k in 0..extra_reads {
        let other = labels[2 + k];
        let v = rng.random_range(3..90i64);
        steps.push(format!("check the neighbouring bar for {other} at value {v} to confirm the axis scale"));
    }
    steps.push(format!("take the {} of {a} and {b} which gives {answer}", op.name()));

    let mut distractors: Vec<String> = Vec::new();
    for cand in [answer + 1, answer - 1, answer + 10, answer - 10, a, b, answer + 2, answer * 2, answer + 5] {
        let s = cand.to_string();
        if cand != answer && cand >= 0 && !distractors.contains(&s) {
            distractors.push(s);
        }
        if distractors.len() == 5 {
            break;
        }
    }
    Scene {
        scene_id: format!("scene-{index:04}"),
        latent_answer: Some(answer.to_string()),
        solution: answer.to_string(),
        canonical_steps: steps,
        distractor_answers: distractors,
        difficulty,
        question: format!("what is the {} of the {la} and {lb} bars in the {topic} {chart}", op.name()),
    }
}

/// Seeded bank of `size` scenes with difficulties cycling 1..=5.
pub fn generate_bank(size: usize, seed: u64) -> Vec<Scene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5ce_e5ba_4b);
    (0..size).map(|i| generate_scene(&mut rng, i, (i % 5) as u8 + 1)).collect()
}
