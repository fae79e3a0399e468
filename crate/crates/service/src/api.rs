//! Wire types of the scoring API.

use std::collections::BTreeMap;

use axum::http::StatusCode;
use cotagree_core::{DisagreementProfile, LooMatrix, ParseFailure, RewardBreakdown};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreRequest {
    pub question: String,
    pub rollouts: Vec<String>,
    /// Training step used to evaluate the mixing schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_overrides: Option<ConfigOverrides>,
}

/// Per-request changes to the server config. `lambda` fixes the mixing
/// weight outright; otherwise it comes from the (possibly overridden)
/// schedule at `step`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_len: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warmup_steps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramp_steps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embed_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub attempted: usize,
    pub distribution: BTreeMap<String, f64>,
    pub entropy: f64,
    pub dominant_answer: String,
    pub group_indices: Vec<usize>,
    pub density: f64,
    pub lambda: f64,
    /// One per parsed rollout, in batch order.
    pub breakdowns: Vec<RewardBreakdown<f64>>,
    pub parse_failures: Vec<ParseFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseResponse {
    pub dominant_answer: String,
    pub group_indices: Vec<usize>,
    pub loo: LooMatrix<f64>,
    pub profile: DisagreementProfile<f64>,
    pub argmax_step: Option<usize>,
    pub parse_failures: Vec<ParseFailure>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
    pub config_hash: String,
}

/// JSON body of every non-200 response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ApiError {
    #[error("malformed request body: {message}")]
    MalformedBody { field: Option<String>, message: String },
    #[error("invalid value for `{field}`: {message}")]
    InvalidOverride { field: String, message: String },
    #[error("rollouts must be non-empty")]
    EmptyRollouts,
    #[error("none of the {0} rollouts parsed")]
    NoParsedRollouts(usize),
    #[error("no step position has at least two dominant-group members")]
    GroupTooSmall,
    #[error("internal error: {0}")]
    Internal(String),
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::MalformedBody { .. } | ApiError::InvalidOverride { .. } | ApiError::EmptyRollouts => {
                StatusCode::BAD_REQUEST
            }
            ApiError::NoParsedRollouts(_) | ApiError::GroupTooSmall => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ApiError::MalformedBody { .. } => "MalformedBody",
            ApiError::InvalidOverride { .. } => "InvalidOverride",
            ApiError::EmptyRollouts => "EmptyRollouts",
            ApiError::NoParsedRollouts(_) => "NoParsedRollouts",
            ApiError::GroupTooSmall => "GroupTooSmall",
            ApiError::Internal(_) => "Internal",
        }
    }

    pub fn body(&self) -> ErrorBody {
        let field = match self {
            ApiError::MalformedBody { field, .. } => field.clone(),
            ApiError::InvalidOverride { field, .. } => Some(field.clone()),
            ApiError::EmptyRollouts => Some("rollouts".into()),
            _ => None,
        };
        ErrorBody { error: self.kind().into(), message: self.to_string(), field }
    }
}
