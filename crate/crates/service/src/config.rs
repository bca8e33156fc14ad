use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wallfilter_core::nbayes::DEFAULT_ALPHA;
use wallfilter_core::PolicyConfig;

use crate::error::ServiceError;

pub const ENV_LISTEN: &str = "WALLFILTER_LISTEN";
pub const ENV_DATA_DIR: &str = "WALLFILTER_DATA_DIR";

/// A wall created at startup if the event log does not know it yet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallSeed {
    pub id: String,
    pub owner: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: String,
    pub data_dir: PathBuf,
    /// Naive Bayes model used until the first retrain.
    pub model_path: PathBuf,
    /// Bundled English list when absent.
    #[serde(default)]
    pub stop_list_path: Option<PathBuf>,
    pub manager_token: String,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Write a state snapshot after this many events (0 disables).
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: u64,
    /// fsync the event log after every append.
    #[serde(default = "default_true")]
    pub fsync: bool,
    #[serde(default)]
    pub policy: PolicyConfig,
    #[serde(default)]
    pub walls: Vec<WallSeed>,
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn default_snapshot_every() -> u64 {
    256
}

fn default_true() -> bool {
    true
}

impl ServiceConfig {
    /// Minimal config with defaults for everything optional.
    pub fn new(
        data_dir: impl Into<PathBuf>,
        model_path: impl Into<PathBuf>,
        manager_token: impl Into<String>,
    ) -> Self {
        ServiceConfig {
            listen: "127.0.0.1:8080".into(),
            data_dir: data_dir.into(),
            model_path: model_path.into(),
            stop_list_path: None,
            manager_token: manager_token.into(),
            alpha: DEFAULT_ALPHA,
            snapshot_every: default_snapshot_every(),
            fsync: true,
            policy: PolicyConfig::default(),
            walls: Vec::new(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, ServiceError> {
        let cfg: ServiceConfig =
            toml::from_str(text).map_err(|e| ServiceError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML config file, then applies the environment overrides for
    /// the listen address and data directory. Relative paths resolve against
    /// the config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ServiceError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.data_dir, &mut cfg.model_path] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(p) = cfg.stop_list_path.as_mut().filter(|p| p.is_relative()) {
            *p = base.join(&*p);
        }
        cfg.apply_env(|k| std::env::var(k).ok());
        Ok(cfg)
    }

    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        if let Some(listen) = lookup(ENV_LISTEN) {
            self.listen = listen;
        }
        if let Some(dir) = lookup(ENV_DATA_DIR) {
            self.data_dir = dir.into();
        }
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        self.policy
            .validate()
            .map_err(|e| ServiceError::Config(e.to_string()))?;
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(ServiceError::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.manager_token.is_empty() {
            return Err(ServiceError::Config("manager_token must not be empty".into()));
        }
        if self.walls.iter().any(|w| w.id.is_empty()) {
            return Err(ServiceError::Config("wall ids must not be empty".into()));
        }
        Ok(())
    }
}
