//! Service configuration. Sources, lowest to highest priority: built-in
//! defaults, a TOML file, environment variables, command-line flags.

use std::path::{Path, PathBuf};

use rta_assist::{DriftPolicy, ProviderConfig, ProviderKind};
use rta_core::agreement::{DiscussionConfig, OverlapRule};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config file {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("invalid setting: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub host: String,
    pub port: u16,
    pub data_dir: PathBuf,
    /// Write a state snapshot every this many events; 0 disables snapshots.
    pub snapshot_every: u64,
    pub session_ttl_secs: u64,
    /// Buffered frames per project before a slow subscriber is resynchronized from the log.
    pub broadcast_capacity: usize,
    pub provider: ProviderConfig,
    pub overlap_rule: OverlapRule,
    pub discussion: DiscussionConfig,
    pub drift: DriftPolicy,
    pub exemplar_limit: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            host: "127.0.0.1".into(),
            port: 7878,
            data_dir: PathBuf::from("reflexis-data"),
            snapshot_every: 1000,
            session_ttl_secs: 30 * 24 * 3600,
            broadcast_capacity: 1024,
            provider: ProviderConfig::default(),
            overlap_rule: OverlapRule::default(),
            discussion: DiscussionConfig::default(),
            drift: DriftPolicy::default(),
            exemplar_limit: rta_assist::inputs::DEFAULT_EXEMPLAR_LIMIT,
        }
    }
}

/// Values from flags or the environment; `None` leaves the lower layer in place.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub host: Option<String>,
    pub port: Option<u16>,
    pub data_dir: Option<PathBuf>,
    pub provider: Option<ProviderKind>,
    pub provider_endpoint: Option<String>,
    pub provider_model: Option<String>,
    pub api_key_env: Option<String>,
}

impl Config {
    pub fn from_toml(text: &str, path: &Path) -> Result<Config, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse { path: path.to_owned(), source })
    }

    /// Defaults, then `file` if given, then `overrides`.
    pub fn load(file: Option<&Path>, overrides: &Overrides) -> Result<Config, ConfigError> {
        let mut config = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_owned(), source })?;
                Config::from_toml(&text, path)?
            }
            None => Config::default(),
        };
        config.apply(overrides);
        config.validate()?;
        Ok(config)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = &o.host {
            self.host = v.clone();
        }
        if let Some(v) = o.port {
            self.port = v;
        }
        if let Some(v) = &o.data_dir {
            self.data_dir = v.clone();
        }
        if let Some(v) = o.provider {
            self.provider.kind = v;
        }
        if let Some(v) = &o.provider_endpoint {
            self.provider.endpoint = Some(v.clone());
        }
        if let Some(v) = &o.provider_model {
            self.provider.model = Some(v.clone());
        }
        if let Some(v) = &o.api_key_env {
            self.provider.api_key_env = Some(v.clone());
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let d = &self.discussion;
        if !(0.0..=1.0).contains(&d.low) || !(0.0..=1.0).contains(&d.high) || d.low > d.high {
            return Err(ConfigError::Invalid(format!("discussion thresholds low={} high={}", d.low, d.high)));
        }
        if self.broadcast_capacity == 0 {
            return Err(ConfigError::Invalid("broadcast_capacity must be positive".into()));
        }
        if self.exemplar_limit == 0 {
            return Err(ConfigError::Invalid("exemplar_limit must be positive".into()));
        }
        if let Some(name) = &self.provider.api_key_env {
            if name.is_empty() || name.contains('=') {
                return Err(ConfigError::Invalid(format!("api_key_env {name:?} is not a variable name")));
            }
        }
        Ok(())
    }
}
