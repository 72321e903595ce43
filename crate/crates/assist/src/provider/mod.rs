//! Pluggable completion backends.

mod remote;
mod stub;

use std::sync::Arc;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use remote::RemoteProvider;
pub use stub::{distinct_codes, keyword_count, max_similarity, StubProvider, DRIFT_THRESHOLD, NO_ENTRIES};

use crate::request::AssistRequest;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    #[default]
    Stub,
    Remote,
}

impl std::str::FromStr for ProviderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stub" => Ok(ProviderKind::Stub),
            "remote" => Ok(ProviderKind::Remote),
            other => Err(format!("unknown provider {other:?} (expected stub or remote)")),
        }
    }
}

/// Provider settings. Credentials are referenced by environment variable name only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub api_key_env: Option<String>,
    pub timeout_ms: u64,
    pub max_retries: u32,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig { kind: ProviderKind::Stub, endpoint: None, model: None, api_key_env: None, timeout_ms: 30_000, max_retries: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("provider timed out")]
    Timeout,
    #[error("provider transport error: {0}")]
    Transport(String),
    #[error("provider returned HTTP {0}")]
    Status(u16),
    #[error("credential variable {0} is not set")]
    MissingCredential(String),
    #[error("provider reply has no message content: {0}")]
    BadEnvelope(String),
    #[error("provider misconfigured: {0}")]
    Config(String),
}

#[async_trait]
pub trait Provider: Send + Sync {
    fn kind(&self) -> ProviderKind;

    /// Raw text of the model's reply, expected to be a JSON document.
    async fn complete(&self, request: &AssistRequest) -> Result<String, ProviderError>;
}

pub fn build_provider(config: &ProviderConfig) -> Result<Arc<dyn Provider>, ProviderError> {
    Ok(match config.kind {
        ProviderKind::Stub => Arc::new(StubProvider),
        ProviderKind::Remote => Arc::new(RemoteProvider::new(config)?),
    })
}
