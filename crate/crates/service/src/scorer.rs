//! Request evaluation shared by the HTTP routes and in-process callers.

use cotagree_core::{
    diagnose_batch, lambda_at, score_batch, Config, ConfigError, DiagnosticsError, HashedEmbedder, Score, ScoreError,
};

use crate::api::{ApiError, ConfigOverrides, DiagnoseResponse, Health, ScoreRequest, ScoreResponse};

/// Immutable scoring context: the validated server config and its hash.
#[derive(Debug, Clone)]
pub struct Scorer {
    config: Config,
    hash: String,
}

impl Scorer {
    pub fn new(config: Config) -> Result<Self, ConfigError> {
        config.validate()?;
        let hash = config.hash();
        Ok(Self { config, hash })
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn health(&self) -> Health {
        Health { status: "ok".into(), version: env!("CARGO_PKG_VERSION").into(), config_hash: self.hash.clone() }
    }

    /// Decodes a request body, naming the offending field on failure.
    pub fn parse_request(body: &[u8]) -> Result<ScoreRequest, ApiError> {
        let de = &mut serde_json::Deserializer::from_slice(body);
        let req: ScoreRequest = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let field = (path != ".").then_some(path);
            ApiError::MalformedBody { field, message: e.into_inner().to_string() }
        })?;
        if req.rollouts.is_empty() {
            return Err(ApiError::EmptyRollouts);
        }
        Ok(req)
    }

    /// Config and mixing weight in effect for one request.
    pub fn effective(&self, req: &ScoreRequest) -> Result<(Config, f64), ApiError> {
        let ov = req.config_overrides.unwrap_or_default();
        let mut cfg = self.config.clone();
        apply(&mut cfg, &ov);
        cfg.validate().map_err(|e| match e.field().and_then(override_key) {
            Some(key) => ApiError::InvalidOverride { field: format!("config_overrides.{key}"), message: reason(&e) },
            None => ApiError::Internal(e.to_string()),
        })?;
        let lambda = match (ov.lambda, req.step) {
            (Some(l), _) if (0.0..=1.0).contains(&l) => l,
            (Some(_), _) => {
                return Err(ApiError::InvalidOverride {
                    field: "config_overrides.lambda".into(),
                    message: "must lie in [0, 1]".into(),
                })
            }
            (None, Some(t)) => lambda_at(t, &cfg.schedule),
            (None, None) => cfg.schedule.lambda_max,
        };
        Ok((cfg, lambda))
    }

    fn batch(&self, req: &ScoreRequest) -> Result<Score, ApiError> {
        if req.rollouts.is_empty() {
            return Err(ApiError::EmptyRollouts);
        }
        let (cfg, lambda) = self.effective(req)?;
        // A fresh embedder per request keeps handlers free of shared state.
        let embedder = HashedEmbedder::new(cfg.embed);
        score_batch(&req.rollouts, &cfg.parse, &cfg.reward, lambda, &embedder).map_err(|e| match e {
            ScoreError::EmptyBatch => ApiError::EmptyRollouts,
            ScoreError::NoParsedRollouts(n) => ApiError::NoParsedRollouts(n),
            other => ApiError::Internal(other.to_string()),
        })
    }

    pub fn score(&self, req: &ScoreRequest) -> Result<ScoreResponse, ApiError> {
        let s = self.batch(req)?;
        Ok(ScoreResponse {
            attempted: s.attempted,
            distribution: s.distribution,
            entropy: s.entropy,
            dominant_answer: s.dominant_answer,
            group_indices: s.group_indices,
            density: s.density,
            lambda: s.lambda,
            breakdowns: s.breakdowns,
            parse_failures: s.parse_failures,
        })
    }

    pub fn diagnose(&self, req: &ScoreRequest) -> Result<DiagnoseResponse, ApiError> {
        let s = self.batch(req)?;
        let (loo, profile) = diagnose_batch(&s).map_err(|e| match e {
            DiagnosticsError::GroupTooSmall => ApiError::GroupTooSmall,
            other => ApiError::Internal(other.to_string()),
        })?;
        Ok(DiagnoseResponse {
            dominant_answer: s.dominant_answer,
            group_indices: s.group_indices,
            argmax_step: profile.argmax(),
            loo,
            profile,
            parse_failures: s.parse_failures,
        })
    }

    /// Response bytes for a raw `/v1/score` body.
    pub fn score_body(&self, body: &[u8]) -> Result<Vec<u8>, ApiError> {
        let req = Self::parse_request(body)?;
        to_bytes(&self.score(&req)?)
    }

    /// Response bytes for a raw `/v1/diagnose` body.
    pub fn diagnose_body(&self, body: &[u8]) -> Result<Vec<u8>, ApiError> {
        let req = Self::parse_request(body)?;
        to_bytes(&self.diagnose(&req)?)
    }
}

pub(crate) fn to_bytes<T: serde::Serialize>(value: &T) -> Result<Vec<u8>, ApiError> {
    serde_json::to_vec(value).map_err(|e| ApiError::Internal(e.to_string()))
}

fn apply(cfg: &mut Config, ov: &ConfigOverrides) {
    let r = &mut cfg.reward;
    r.alpha = ov.alpha.unwrap_or(r.alpha);
    r.gamma = ov.gamma.unwrap_or(r.gamma);
    r.delta = ov.delta.unwrap_or(r.delta);
    r.eta_len = ov.eta_len.unwrap_or(r.eta_len);
    let s = &mut cfg.schedule;
    s.warmup_steps = ov.warmup_steps.unwrap_or(s.warmup_steps);
    s.ramp_steps = ov.ramp_steps.unwrap_or(s.ramp_steps);
    s.lambda_max = ov.lambda_max.unwrap_or(s.lambda_max);
    cfg.embed.seed = ov.embed_seed.unwrap_or(cfg.embed.seed);
}

fn override_key(config_field: &str) -> Option<&'static str> {
    Some(match config_field {
        "reward.alpha" => "alpha",
        "reward.gamma" => "gamma",
        "reward.delta" => "delta",
        "reward.eta_len" => "eta_len",
        "schedule.warmup_steps" => "warmup_steps",
        "schedule.ramp_steps" => "ramp_steps",
        "schedule.lambda_max" => "lambda_max",
        "embed.seed" => "embed_seed",
        _ => return None,
    })
}

fn reason(e: &ConfigError) -> String {
    match e {
        ConfigError::Invalid { reason, .. } => reason.clone(),
        other => other.to_string(),
    }
}
