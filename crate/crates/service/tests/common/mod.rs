#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use cotagree_core::selfplay::{generate_bank, generate_rollout, shortcut_batch, Generator, NoiseRates};
use cotagree_core::Config;
use cotagree_service::{serve, ConfigOverrides, ScoreRequest, Scorer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Fifty requests covering unanimous, split, shortcut, malformed-member and
/// overridden batches.
pub fn corpus() -> Vec<ScoreRequest> {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let bank = generate_bank(10, 50);
    let mut out = Vec::new();
    for k in 0..50usize {
        let scene = &bank[k % bank.len()];
        let noise = NoiseRates { paraphrase: 0.1, offmode: 0.4 };
        let rollouts: Vec<String> = match k % 5 {
            0 => {
                let text = generate_rollout(Generator::Grounded, scene, NoiseRates { paraphrase: 0.0, offmode: 0.0 }, "", &mut rng);
                vec![text; 5]
            }
            1 => shortcut_batch(k as u64, 0.05).texts,
            2 => (0..5)
                .map(|_| {
                    let g = Generator::ALL[rng.random_range(0..3)];
                    let off = &scene.distractor_answers[rng.random_range(0..scene.distractor_answers.len())];
                    generate_rollout(g, scene, noise, off, &mut rng)
                })
                .collect(),
            3 => {
                let mut v: Vec<String> =
                    (0..4).map(|_| generate_rollout(Generator::Grounded, scene, noise, "", &mut rng)).collect();
                v.insert(rng.random_range(0..5), "<answer>no reasoning</answer>".into());
                v
            }
            _ => (0..(3 + k % 4))
                .map(|_| generate_rollout(Generator::Offmode, scene, noise, &scene.distractor_answers[0], &mut rng))
                .collect(),
        };
        let config_overrides = match k % 7 {
            1 => Some(ConfigOverrides { gamma: Some(1.0), ..Default::default() }),
            2 => Some(ConfigOverrides { lambda: Some(0.0), ..Default::default() }),
            3 => Some(ConfigOverrides { alpha: Some(2.0), eta_len: Some(0.0), delta: Some(0.5), ..Default::default() }),
            4 => Some(ConfigOverrides { warmup_steps: Some(5), ramp_steps: Some(10), lambda_max: Some(1.0), ..Default::default() }),
            5 => Some(ConfigOverrides { embed_seed: Some(7), ..Default::default() }),
            _ => None,
        };
        out.push(ScoreRequest {
            question: scene.question.clone(),
            rollouts,
            step: (k % 3 != 0).then_some((k as u64) * 7),
            config_overrides,
        });
    }
    out
}

pub struct TestServer {
    pub base: String,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    handle: Option<std::thread::JoinHandle<()>>,
}

impl TestServer {
    pub fn start(config: Config) -> Self {
        let scorer = Arc::new(Scorer::new(config).unwrap());
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let (addr_tx, addr_rx) = std::sync::mpsc::channel();
        let handle = std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build().unwrap();
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
                addr_tx.send(listener.local_addr().unwrap()).unwrap();
                serve(listener, scorer, async {
                    let _ = rx.await;
                })
                .await
                .unwrap();
            });
        });
        let addr = addr_rx.recv().unwrap();
        Self { base: format!("http://{addr}"), shutdown: Some(tx), handle: Some(handle) }
    }
}

impl Drop for TestServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}
