//! Closed-form examples checked against the frozen reference table in
//! `tests/data/oracles.json` (regenerate with `python3 tools/oracles.py`).

use cotagree_core::*;
use serde_json::Value;

const TOL: f64 = 1e-9;

fn table() -> Value {
    serde_json::from_str(include_str!("data/oracles.json")).unwrap()
}

fn oracle(name: &str) -> f64 {
    table()[name].as_f64().unwrap_or_else(|| panic!("missing oracle {name}"))
}

fn close(name: &str, got: f64) {
    let want = oracle(name);
    assert!((got - want).abs() <= TOL, "{name}: got {got}, want {want}");
}

fn rollout(steps: &[String], answer: &str) -> String {
    let think: Vec<String> = steps.iter().enumerate().map(|(k, s)| format!("Step {}: {s}", k + 1)).collect();
    format!("<think>{}</think><answer>{answer}</answer>", think.join("\n"))
}

fn parsed(answers: &[&str]) -> Vec<ParsedRollout> {
    answers
        .iter()
        .map(|a| parse_rollout(&RawRollout::new(rollout(&["x".into()], a)), &ParseConfig::default()).unwrap())
        .collect()
}

fn unit(dim: usize, k: usize) -> StepEmbedding<f64> {
    let mut v = vec![0.0; dim];
    v[k] = 1.0;
    StepEmbedding(v)
}

#[test]
fn consensus_values() {
    let rs = parsed(&["a", "a", "a", "b", "b"]);
    let dist = empirical_distribution(&rs).unwrap();
    close("entropy_06_04", answer_entropy::<f64>(&dist));
    let g = dominant_group::<f64>(&rs, &dist, 0.5).unwrap();
    assert_eq!(g.member_indices, vec![0, 1, 2]);
    close("density_3_of_5", g.density);
    let spread = parsed(&["a", "b", "c", "d", "e"]);
    close("entropy_uniform5", answer_entropy::<f64>(&empirical_distribution(&spread).unwrap()));
}

#[test]
fn embedding_values() {
    let protos = prototypes(&[vec![unit(4, 0)], vec![unit(4, 1)]]).unwrap();
    let n: f64 = protos[0].vector.iter().map(|x| x * x).sum::<f64>().sqrt();
    close("prototype_norm_orthogonal", n);
}

#[test]
fn reward_values() {
    let w = position_weights(3, 0.7).unwrap();
    close("weight_1", w.at(1));
    close("weight_2", w.at(2));
    close("weight_3", w.at(3));
    close("length_excess_1_5", length_excess::<f64>(192, 128));
    close("answer_reward", answer_reward(0.6, 0.5, 2.0, 0.1).unwrap());
    close("lambda_midpoint", lambda_at(20 + 75, &MixSchedule::<f64>::default()));
    close("mixed_reward", mixed_reward(0.5, 0.8, 0.7));
    close("proposer_reward_h0", proposer_reward(0.0, &ProposerShaping::<f64>::default()));
}

#[test]
fn singleton_group_reward() {
    let cfg = ParseConfig::default();
    let steps: Vec<String> = (0..cfg.max_steps).map(|k| format!("distinct step number {k} reads the chart")).collect();
    let mut texts = vec![rollout(&steps, "a")];
    for a in ["b", "c", "d", "e"] {
        texts.push(rollout(&[format!("unrelated {a}")], a));
    }
    let emb = HashedEmbedder::new(EmbedConfig::default());
    let s = score_batch::<f64, _>(&texts, &cfg, &RewardParams::default(), 1.0, &emb).unwrap();
    assert_eq!(s.group_indices, vec![0]);
    close("singleton_r_step", s.breakdowns[0].r_step);
}

#[test]
fn optimizer_values() {
    close("log_prob_10_0_0", Policy::new(vec![10.0, 0.0, 0.0]).log_prob(0).unwrap());
    let p = Policy::new(vec![0.9f64.ln(), 0.1f64.ln()]);
    close("kl_09_01", kl_categorical(&p, &Policy::uniform(2)).unwrap());
    let c = adapt_beta(KlController { beta: 0.1, target: 0.05, eta_ctrl: 0.1, ..Default::default() }, 0.1);
    close("adapt_beta", c.beta);
    let b = EmaBaseline { value: 0.5, momentum: 0.05, initialized: true };
    close("baseline", update_baseline(b, 0.7).value);
}

#[test]
fn diagnostics_values() {
    let v = unit(3, 0);
    let m = loo_similarity(&[(0, vec![v.clone()]), (1, vec![v]), (2, vec![unit(3, 1)])]).unwrap();
    close("loo_pair_cosine", m.values[0][0].unwrap());
    close("loo_pair_cosine", m.values[1][0].unwrap());
    assert!(m.values[2][0].unwrap().abs() <= TOL);
    let col = LooMatrix { rows: vec![0, 1, 2], columns: vec![1], values: vec![vec![Some(1.0)], vec![Some(0.0)], vec![Some(0.5)]] };
    close("profile_mean", disagreement_profile(&col).values[0]);
}

#[test]
fn canonical_decimal() {
    let want = table()["canonical_neg_half"].as_str().unwrap().to_string();
    assert_eq!(normalize_answer("-0.50").unwrap().as_str(), want);
}
