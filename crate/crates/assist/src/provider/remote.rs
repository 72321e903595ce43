use std::time::Duration;

use async_trait::async_trait;
use serde_json::{json, Value};

use super::{Provider, ProviderConfig, ProviderError, ProviderKind};
use crate::request::AssistRequest;

/// Chat-completions style HTTP backend with a JSON-schema response_format.
pub struct RemoteProvider {
    client: reqwest::Client,
    endpoint: String,
    model: Option<String>,
    api_key_env: Option<String>,
}

impl RemoteProvider {
    pub fn new(config: &ProviderConfig) -> Result<Self, ProviderError> {
        let endpoint = config.endpoint.clone().ok_or_else(|| ProviderError::Config("remote provider needs an endpoint".into()))?;
        reqwest::Url::parse(&endpoint).map_err(|e| ProviderError::Config(format!("bad endpoint {endpoint:?}: {e}")))?;
        let client = reqwest::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| ProviderError::Config(e.to_string()))?;
        Ok(RemoteProvider { client, endpoint, model: config.model.clone(), api_key_env: config.api_key_env.clone() })
    }

    pub fn body(&self, request: &AssistRequest) -> Value {
        let mut body = json!({
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.user},
            ],
            "response_format": request.response_format(),
        });
        if let Some(model) = &self.model {
            body["model"] = json!(model);
        }
        body
    }
}

#[async_trait]
impl Provider for RemoteProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Remote
    }

    async fn complete(&self, request: &AssistRequest) -> Result<String, ProviderError> {
        let mut req = self.client.post(&self.endpoint).header("x-request-id", &request.request_id).json(&self.body(request));
        if let Some(var) = &self.api_key_env {
            let key = std::env::var(var).map_err(|_| ProviderError::MissingCredential(var.clone()))?;
            req = req.bearer_auth(key);
        }
        let resp = req.send().await.map_err(|e| {
            if e.is_timeout() {
                ProviderError::Timeout
            } else {
                ProviderError::Transport(e.to_string())
            }
        })?;
        let status = resp.status();
        if !status.is_success() {
            return Err(ProviderError::Status(status.as_u16()));
        }
        let envelope: Value = resp.json().await.map_err(|e| {
            if e.is_timeout() {
                ProviderError::Timeout
            } else {
                ProviderError::BadEnvelope(e.to_string())
            }
        })?;
        envelope["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| ProviderError::BadEnvelope("choices[0].message.content is not a string".into()))
    }
}
