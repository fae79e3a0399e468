//! Real TCP server driven by an HTTP client.

mod common;

use common::{corpus, golden_dir, TestServer};
use cotagree_core::selfplay::shortcut_batch;
use cotagree_core::{cosine, Config, EmbedConfig, Embedder, HashedEmbedder, StepEmbedding};
use cotagree_service::{DiagnoseResponse, ErrorBody, Health, ScoreResponse};
use serde_json::{json, Value};

async fn post(base: &str, path: &str, body: &str) -> (u16, Vec<u8>) {
    let resp = reqwest::Client::new()
        .post(format!("{base}{path}"))
        .header("content-type", "application/json")
        .body(body.to_string())
        .send()
        .await
        .unwrap();
    let status = resp.status().as_u16();
    (status, resp.bytes().await.unwrap().to_vec())
}

fn rollout(steps: &[&str], answer: &str) -> String {
    let think: Vec<String> = steps.iter().enumerate().map(|(k, s)| format!("Step {}: {s}", k + 1)).collect();
    format!("<think>{}</think><answer>{answer}</answer>", think.join("\n"))
}

#[tokio::test]
async fn healthz_reports_config_hash() {
    let server = TestServer::start(Config::default());
    let resp = reqwest::get(format!("{}/healthz", server.base)).await.unwrap();
    assert_eq!(resp.status(), 200);
    let h: Health = resp.json().await.unwrap();
    assert_eq!(h.status, "ok");
    assert_eq!(h.version, env!("CARGO_PKG_VERSION"));
    assert_eq!(h.config_hash, Config::default().hash());

    let mut other = Config::default();
    other.reward.gamma = 1.0;
    let second = TestServer::start(other);
    let h2: Health = reqwest::get(format!("{}/healthz", second.base)).await.unwrap().json().await.unwrap();
    assert_ne!(h2.config_hash, h.config_hash);
    let h3: Health = reqwest::get(format!("{}/healthz", server.base)).await.unwrap().json().await.unwrap();
    assert_eq!(h3, h);
}

#[tokio::test]
async fn golden_corpus_over_http_is_byte_identical() {
    let server = TestServer::start(Config::default());
    let requests = std::fs::read_to_string(golden_dir().join("requests.jsonl")).unwrap();
    let responses = std::fs::read_to_string(golden_dir().join("responses.jsonl")).unwrap();
    for (k, (req, want)) in requests.lines().zip(responses.lines()).enumerate() {
        let (status, body) = post(&server.base, "/v1/score", req).await;
        assert_eq!(status, 200, "case {k}");
        assert_eq!(String::from_utf8(body).unwrap(), want, "case {k}");
    }
}

#[tokio::test]
async fn unanimous_batch_hits_the_ceiling() {
    let server = TestServer::start(Config::default());
    let text = rollout(&["read the axis", "sum the bars"], "42");
    let body = json!({
        "question": "q",
        "rollouts": vec![text; 5],
        "config_overrides": {"gamma": 0.0, "eta_len": 0.0, "lambda": 0.0}
    });
    let (status, bytes) = post(&server.base, "/v1/score", &body.to_string()).await;
    assert_eq!(status, 200);
    let resp: ScoreResponse = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(resp.breakdowns.len(), 5);
    assert!(resp.breakdowns.iter().all(|b| b.r_sol == 1.0));
}

#[tokio::test]
async fn client_errors() {
    let server = TestServer::start(Config::default());
    let cases = [
        (json!({"question": "q", "rollouts": []}).to_string(), 400, Some("rollouts")),
        ("{not json".to_string(), 400, None),
        (json!({"question": "q"}).to_string(), 400, None),
        (json!({"question": "q", "rollouts": ["x"], "extra": 1}).to_string(), 400, Some("extra")),
        (
            json!({"question": "q", "rollouts": ["x"], "config_overrides": {"delta": 2.0}}).to_string(),
            400,
            Some("config_overrides.delta"),
        ),
        (
            json!({"question": "q", "rollouts": ["x"], "config_overrides": {"lambda": "high"}}).to_string(),
            400,
            Some("config_overrides.lambda"),
        ),
        (json!({"question": "q", "rollouts": ["plain text", "<answer>1</answer>"]}).to_string(), 422, None),
    ];
    for (body, want_status, want_field) in cases {
        for path in ["/v1/score", "/v1/diagnose"] {
            let (status, bytes) = post(&server.base, path, &body).await;
            assert_eq!(status, want_status, "{path} {body}");
            let err: ErrorBody = serde_json::from_slice(&bytes).unwrap();
            if let Some(f) = want_field {
                assert_eq!(err.field.as_deref(), Some(f), "{body}");
            }
        }
    }
}

#[tokio::test]
async fn diagnose_examples() {
    let server = TestServer::start(Config::default());

    let same = rollout(&["read the axis", "find both bars", "add them", "report"], "9");
    let body = json!({"question": "q", "rollouts": vec![same; 4]}).to_string();
    let (status, bytes) = post(&server.base, "/v1/diagnose", &body).await;
    assert_eq!(status, 200);
    let d: DiagnoseResponse = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(d.profile.steps, vec![1, 2, 3, 4]);
    assert!(d.profile.values.iter().all(|v| v.abs() < 1e-12));

    let (a, b) = ("alpha beta gamma", "delta epsilon zeta");
    let body = json!({"question": "q", "rollouts": [rollout(&[a], "1"), rollout(&[b], "1")]}).to_string();
    let d: DiagnoseResponse = serde_json::from_slice(&post(&server.base, "/v1/diagnose", &body).await.1).unwrap();
    let emb = HashedEmbedder::new(EmbedConfig::default());
    let (ea, eb): (StepEmbedding<f64>, StepEmbedding<f64>) = (emb.embed(a), emb.embed(b));
    let c = cosine(ea.as_slice(), eb.as_slice()).unwrap();
    for row in &d.loo.values {
        assert!((row[0].unwrap() - c).abs() < 1e-12);
    }
    assert!((d.profile.values[0] - (1.0 - c)).abs() < 1e-12);

    for seed in 0..10 {
        let body = json!({"question": "q", "rollouts": shortcut_batch(seed, 0.05).texts}).to_string();
        let d: DiagnoseResponse = serde_json::from_slice(&post(&server.base, "/v1/diagnose", &body).await.1).unwrap();
        assert!(matches!(d.argmax_step, Some(2 | 3)), "seed {seed}");
    }

    let body = json!({"question": "q", "rollouts": [rollout(&["x"], "1"), rollout(&["y"], "2")]}).to_string();
    let (status, bytes) = post(&server.base, "/v1/diagnose", &body).await;
    assert_eq!(status, 422);
    assert_eq!(serde_json::from_slice::<ErrorBody>(&bytes).unwrap().error, "GroupTooSmall");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_clients_see_stateless_responses() {
    let server = TestServer::start(Config::default());
    let requests: Vec<String> = corpus().iter().map(|r| serde_json::to_string(r).unwrap()).collect();
    let expected: Vec<String> = std::fs::read_to_string(golden_dir().join("responses.jsonl"))
        .unwrap()
        .lines()
        .map(String::from)
        .collect();
    let mut tasks = Vec::new();
    for worker in 0..8usize {
        let (base, requests, expected) = (server.base.clone(), requests.clone(), expected.clone());
        tasks.push(tokio::spawn(async move {
            // each worker walks the corpus in a different order and mixes in
            // diagnose calls between score calls
            for k in 0..requests.len() {
                let i = (k * 7 + worker * 13) % requests.len();
                let (status, body) = post(&base, "/v1/score", &requests[i]).await;
                assert_eq!(status, 200);
                assert_eq!(String::from_utf8(body).unwrap(), expected[i]);
                if k % 5 == worker % 5 {
                    let _ = post(&base, "/v1/diagnose", &requests[i]).await;
                }
            }
        }));
    }
    for t in tasks {
        t.await.unwrap();
    }
}

#[tokio::test]
async fn responses_are_json_objects() {
    let server = TestServer::start(Config::default());
    let resp = reqwest::Client::new()
        .post(format!("{}/v1/score", server.base))
        .body(json!({"question": "q", "rollouts": [rollout(&["a"], "1")]}).to_string())
        .send()
        .await
        .unwrap();
    assert_eq!(resp.headers()["content-type"], "application/json");
    let v: Value = resp.json().await.unwrap();
    assert!(v.is_object());
}
