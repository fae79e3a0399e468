//! Routes and listener plumbing.

use std::future::Future;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use tokio::net::TcpListener;

use crate::api::ApiError;
use crate::scorer::{to_bytes, Scorer};

pub const ADDR_ENV: &str = "COTAGREE_ADDR";
pub const CONFIG_ENV: &str = "COTAGREE_CONFIG";
pub const DEFAULT_ADDR: &str = "127.0.0.1:8750";

pub fn router(scorer: Arc<Scorer>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/v1/score", post(score))
        .route("/v1/diagnose", post(diagnose))
        .with_state(scorer)
}

fn json(status: StatusCode, body: Vec<u8>) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn reply(result: Result<Vec<u8>, ApiError>) -> Response {
    match result {
        Ok(body) => json(StatusCode::OK, body),
        Err(e) => {
            let body = serde_json::to_vec(&e.body()).unwrap_or_default();
            json(e.status(), body)
        }
    }
}

async fn healthz(State(scorer): State<Arc<Scorer>>) -> Response {
    reply(to_bytes(&scorer.health()))
}

async fn score(State(scorer): State<Arc<Scorer>>, body: Bytes) -> Response {
    reply(scorer.score_body(&body))
}

async fn diagnose(State(scorer): State<Arc<Scorer>>, body: Bytes) -> Response {
    reply(scorer.diagnose_body(&body))
}

pub async fn bind(addr: &str) -> std::io::Result<TcpListener> {
    TcpListener::bind(addr).await
}

/// Serves until `shutdown` resolves, then drains in-flight requests.
pub async fn serve(
    listener: TcpListener,
    scorer: Arc<Scorer>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(scorer)).with_graceful_shutdown(shutdown).await
}
