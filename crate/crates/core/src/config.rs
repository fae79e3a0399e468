//! Single TOML configuration covering every constant of the pipeline,
//! the learners, and the simulator. Every key is optional; missing keys take
//! the defaults documented in `config/default.toml`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embed::EmbedConfig;
use crate::optim::KlController;
use crate::reward::{MixSchedule, ProposerShaping};
use crate::scoring::RewardParams;
use crate::trace::ParseConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(String),
}

impl ConfigError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Invalid { field: field.into(), reason: reason.into() }
    }

    /// The offending key, when the error is about a single value.
    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { field, .. } => Some(field),
            _ => None,
        }
    }
}

/// Step size, baseline momentum and KL controller of one learner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub lr: f64,
    pub ema_momentum: f64,
    /// Updates happen every `update_every` iterations on the buffered samples.
    pub update_every: usize,
    pub controller: KlController<f64>,
}

impl LearnerConfig {
    pub fn solver_default() -> Self {
        let controller = KlController { target: 0.3, eta_ctrl: 0.03, ..KlController::default() };
        Self { lr: 0.07, ema_momentum: 0.05, update_every: 1, controller }
    }

    pub fn proposer_default() -> Self {
        Self { lr: 0.5, ema_momentum: 0.05, update_every: 5, controller: KlController::default() }
    }

    fn validate(&self, section: &str) -> Result<(), ConfigError> {
        let f = |k: &str| format!("{section}.{k}");
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(ConfigError::invalid(f("lr"), "must be positive"));
        }
        if !(self.ema_momentum > 0.0 && self.ema_momentum <= 1.0) {
            return Err(ConfigError::invalid(f("ema_momentum"), "must lie in (0, 1]"));
        }
        if self.update_every == 0 {
            return Err(ConfigError::invalid(f("update_every"), "must be at least 1"));
        }
        let c = &self.controller;
        if !(c.target > 0.0) {
            return Err(ConfigError::invalid(f("controller.target"), "must be positive"));
        }
        if !(c.eta_ctrl > 0.0) {
            return Err(ConfigError::invalid(f("controller.eta_ctrl"), "must be positive"));
        }
        if !(c.beta_min > 0.0 && c.beta_min <= c.beta_max) {
            return Err(ConfigError::invalid(f("controller.beta_min"), "must satisfy 0 < beta_min <= beta_max"));
        }
        if !(c.beta >= c.beta_min && c.beta <= c.beta_max) {
            return Err(ConfigError::invalid(f("controller.beta"), "must lie in [beta_min, beta_max]"));
        }
        Ok(())
    }
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self::solver_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulatorConfig {
    pub steps: u64,
    /// Solver rollouts per question.
    pub rollouts: usize,
    /// Procedurally generated scenes when `scene_bank` is unset.
    pub scene_bank_size: usize,
    /// Optional JSON file holding a list of scenes.
    pub scene_bank: Option<PathBuf>,
    /// Per-token perturbation rate of grounded and shortcut traces.
    pub paraphrase_noise: f64,
    /// Per-token perturbation rate of off-mode traces.
    pub offmode_noise: f64,
    /// Per difficulty level 1..=5, the probability that a rollout slips into
    /// an off-mode trace whatever generator the Solver chose.
    pub slip_profile: [f64; 5],
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        Self {
            steps: 500,
            rollouts: 5,
            scene_bank_size: 50,
            scene_bank: None,
            paraphrase_noise: 0.05,
            offmode_noise: 0.4,
            slip_profile: [0.0, 0.05, 0.1, 0.18, 0.28],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub parse: ParseConfig,
    pub embed: EmbedConfig,
    pub reward: RewardParams<f64>,
    pub schedule: MixSchedule<f64>,
    pub shaping: ProposerShaping<f64>,
    pub solver: LearnerConfig,
    pub proposer: LearnerConfig,
    pub simulator: SimulatorConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            parse: ParseConfig::default(),
            embed: EmbedConfig::default(),
            reward: RewardParams::default(),
            schedule: MixSchedule::default(),
            shaping: ProposerShaping::default(),
            solver: LearnerConfig::solver_default(),
            proposer: LearnerConfig::proposer_default(),
            simulator: SimulatorConfig::default(),
        }
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Stable content hash of the effective configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(&Sha256::digest(&canonical)[..8])
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.parse.max_steps == 0 {
            return Err(ConfigError::invalid("parse.max_steps", "must be at least 1"));
        }
        for (k, v) in [
            ("parse.think_open", &self.parse.think_open),
            ("parse.think_close", &self.parse.think_close),
            ("parse.answer_open", &self.parse.answer_open),
            ("parse.answer_close", &self.parse.answer_close),
        ] {
            if v.is_empty() {
                return Err(ConfigError::invalid(k, "tag must be non-empty"));
            }
        }
        if self.embed.dim < 2 {
            return Err(ConfigError::invalid("embed.dim", "must be at least 2"));
        }
        if self.embed.token_budget == 0 {
            return Err(ConfigError::invalid("embed.token_budget", "must be at least 1"));
        }
        validate_reward(&self.reward, "reward")?;
        validate_schedule(&self.schedule, "schedule")?;
        let s = &self.shaping;
        if !(s.width > 0.0 && s.width.is_finite()) {
            return Err(ConfigError::invalid("shaping.width", "must be positive"));
        }
        if !(s.scale >= 0.0 && s.scale.is_finite()) {
            return Err(ConfigError::invalid("shaping.scale", "must be non-negative"));
        }
        if !(s.target_entropy >= 0.0 && s.target_entropy.is_finite()) {
            return Err(ConfigError::invalid("shaping.target_entropy", "must be non-negative"));
        }
        self.solver.validate("solver")?;
        self.proposer.validate("proposer")?;
        let sim = &self.simulator;
        if sim.rollouts == 0 {
            return Err(ConfigError::invalid("simulator.rollouts", "must be at least 1"));
        }
        if sim.scene_bank.is_none() && sim.scene_bank_size == 0 {
            return Err(ConfigError::invalid("simulator.scene_bank_size", "scene bank is empty"));
        }
        for (k, v) in [("simulator.paraphrase_noise", sim.paraphrase_noise), ("simulator.offmode_noise", sim.offmode_noise)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ConfigError::invalid(k, "must lie in [0, 1]"));
            }
        }
        if sim.slip_profile.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(ConfigError::invalid("simulator.slip_profile", "entries must lie in [0, 1]"));
        }
        Ok(())
    }
}

pub(crate) fn validate_reward(r: &RewardParams<f64>, section: &str) -> Result<(), ConfigError> {
    let f = |k: &str| format!("{section}.{k}");
    if !(r.alpha > 0.0 && r.alpha.is_finite()) {
        return Err(ConfigError::invalid(f("alpha"), "must be positive"));
    }
    if !(0.0..=1.0).contains(&r.eta_len) {
        return Err(ConfigError::invalid(f("eta_len"), "must lie in [0, 1]"));
    }
    if !(r.gamma >= 0.0 && r.gamma.is_finite()) {
        return Err(ConfigError::invalid(f("gamma"), "must be non-negative"));
    }
    if !(r.delta > 0.0 && r.delta < 1.0) {
        return Err(ConfigError::invalid(f("delta"), "must lie in (0, 1)"));
    }
    if r.target_length == 0 {
        return Err(ConfigError::invalid(f("target_length"), "must be at least 1"));
    }
    Ok(())
}

pub(crate) fn validate_schedule(s: &MixSchedule<f64>, section: &str) -> Result<(), ConfigError> {
    if s.ramp_steps == 0 {
        return Err(ConfigError::invalid(format!("{section}.ramp_steps"), "must be at least 1"));
    }
    if !(0.0..=1.0).contains(&s.lambda_max) {
        return Err(ConfigError::invalid(format!("{section}.lambda_max"), "must lie in [0, 1]"));
    }
    Ok(())
}
