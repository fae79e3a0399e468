//! Trace generators the synthetic Solver chooses between.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::scene::Scene;

/// Solver action space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    /// Canonical steps with paraphrase noise, ends at the scene solution.
    Grounded,
    /// Canonical first and last steps with unrelated claims at steps 2-3;
    /// same answer as grounded.
    Shortcut,
    /// Heavily perturbed steps ending at a distractor answer.
    Offmode,
}

impl Generator {
    pub const ALL: [Generator; 3] = [Generator::Grounded, Generator::Shortcut, Generator::Offmode];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

const SYNONYMS: &[(&str, &str)] = &[
    ("locate", "find"),
    ("find", "locate"),
    ("read", "check"),
    ("check", "inspect"),
    ("bar", "column"),
    ("bars", "columns"),
    ("value", "level"),
    ("reaches", "hits"),
    ("vertical", "upright"),
    ("axis", "scale"),
    ("take", "compute"),
    ("gives", "yields"),
    ("which", "that"),
    ("confirm", "verify"),
    ("neighbouring", "adjacent"),
    ("chart", "plot"),
];

/// Per-token perturbation: with probability `rate` a token is replaced by
/// its lexicon synonym, or dropped when it has none. Never returns an empty
/// string for non-empty input.
pub fn paraphrase<R: Rng + ?Sized>(text: &str, rate: f64, rng: &mut R) -> String {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let mut out: Vec<&str> = Vec::with_capacity(tokens.len());
    for &tok in &tokens {
        if rate > 0.0 && rng.random_bool(rate.min(1.0)) {
            if let Some(&(_, syn)) = SYNONYMS.iter().find(|(w, _)| *w == tok) {
                out.push(syn);
            }
        } else {
            out.push(tok);
        }
    }
    if out.is_empty() {
        if let Some(&first) = tokens.first() {
            out.push(first);
        }
    }
    out.join(" ")
}

const SUBJECTS: &[&str] = &[
    "legend", "caption", "gridline spacing", "title font", "footnote", "background gradient", "border style",
    "colour palette", "tick label font", "marker outline", "source credit", "watermark", "page margin",
    "subtitle", "annotation arrow", "shading pattern", "frame thickness", "logo placement",
];
const PREDICATES: &[&str] = &[
    "suggests a survey from", "resembles an older report printed in", "hints at a redesign during",
    "matches a template used around", "mirrors a brochure issued in", "recalls a poster made in",
    "echoes a slide deck from", "implies an archive dated", "looks borrowed from a memo written in",
    "copies a leaflet circulated during",
];
const TAILS: &[&str] = &[
    "1998", "2004", "2011", "2016", "2019", "2021", "early spring", "late autumn", "a rainy winter",
    "some quiet summer", "an election year", "a budget review", "a holiday season", "a trade fair",
];

/// A claim unrelated to the question, composed from a templated bank.
pub fn unrelated_claim<R: Rng + ?Sized>(rng: &mut R) -> String {
    let subject = SUBJECTS[rng.random_range(0..SUBJECTS.len())];
    let predicate = PREDICATES[rng.random_range(0..PREDICATES.len())];
    let tail = TAILS[rng.random_range(0..TAILS.len())];
    format!("{subject} {predicate} {tail}")
}

fn render(steps: &[String], answer: &str) -> String {
    let think: Vec<String> = steps.iter().enumerate().map(|(k, s)| format!("Step {}: {s}", k + 1)).collect();
    format!("<think>{}</think><answer>{answer}</answer>", think.join("\n"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseRates {
    pub paraphrase: f64,
    pub offmode: f64,
}

/// Full rollout text for one generator. `offmode_answer` is only used by
/// [`Generator::Offmode`].
pub fn generate_rollout<R: Rng + ?Sized>(
    generator: Generator,
    scene: &Scene,
    noise: NoiseRates,
    offmode_answer: &str,
    rng: &mut R,
) -> String {
    let canon = &scene.canonical_steps;
    match generator {
        Generator::Grounded => {
            let steps: Vec<String> = canon.iter().map(|s| paraphrase(s, noise.paraphrase, rng)).collect();
            render(&steps, &scene.solution)
        }
        Generator::Shortcut => {
            let last = canon.len().saturating_sub(1);
            let steps: Vec<String> = canon
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    // positions 2 and 3 (1-based), never the first or last step
                    if (k == 1 || k == 2) && k < last {
                        unrelated_claim(rng)
                    } else {
                        paraphrase(s, noise.paraphrase, rng)
                    }
                })
                .collect();
            render(&steps, &scene.solution)
        }
        Generator::Offmode => {
            let mut steps: Vec<String> = canon.iter().map(|s| paraphrase(s, noise.offmode, rng)).collect();
            if let Some(last) = steps.last_mut() {
                *last = format!("so the answer appears to be {offmode_answer}");
            }
            render(&steps, offmode_answer)
        }
    }
}
