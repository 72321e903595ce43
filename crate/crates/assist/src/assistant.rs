//! The four advisory features: precondition checks, provider call with
//! schema-validated retries, and post-processing.

use std::sync::Arc;
use std::time::Instant;

use rta_core::DriftAssessment;
use thiserror::Error;

use crate::provider::{Provider, ProviderError};
use crate::request::{AssistRequest, DiscussionInput, DriftInput, FeatureInput, KeywordsInput, SummaryInput};
use crate::schema::{parse, parse_drift, DiscussionPromptResult, PositionalityKeywords, ReflexiveSummaryResult, SchemaError};

pub use crate::provider::NO_ENTRIES;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AssistError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("schema violation after {attempts} attempts: {last}")]
    SchemaViolation { attempts: u32, last: SchemaError },
}

#[derive(Clone)]
pub struct Assistant {
    provider: Arc<dyn Provider>,
    max_retries: u32,
}

impl Assistant {
    pub fn new(provider: Arc<dyn Provider>, max_retries: u32) -> Self {
        Assistant { provider, max_retries }
    }

    pub fn provider(&self) -> &Arc<dyn Provider> {
        &self.provider
    }

    /// Sends `input` until a reply parses, at most `1 + max_retries` times.
    async fn call<T>(&self, input: FeatureInput, parse: impl Fn(&str) -> Result<T, SchemaError>) -> Result<T, AssistError> {
        let request = AssistRequest::new(input);
        let hash = request.prompt_hash();
        let attempts = self.max_retries + 1;
        let mut last = None;
        for attempt in 1..=attempts {
            let started = Instant::now();
            let outcome = match self.provider.complete(&request).await {
                Ok(raw) => parse(&raw),
                Err(ProviderError::BadEnvelope(msg)) => Err(SchemaError::Shape(msg)),
                Err(e) => {
                    tracing::warn!(request_id = %request.request_id, feature = request.feature.as_str(), prompt_hash = %hash,
                        latency_ms = started.elapsed().as_millis() as u64, attempt, error = %e, "assist call failed");
                    return Err(e.into());
                }
            };
            let latency_ms = started.elapsed().as_millis() as u64;
            match outcome {
                Ok(result) => {
                    tracing::info!(request_id = %request.request_id, feature = request.feature.as_str(), prompt_hash = %hash,
                        latency_ms, attempt, "assist call ok");
                    return Ok(result);
                }
                Err(e) => {
                    tracing::warn!(request_id = %request.request_id, feature = request.feature.as_str(), prompt_hash = %hash,
                        latency_ms, attempt, error = %e, "assist reply rejected");
                    last = Some(e);
                }
            }
        }
        Err(AssistError::SchemaViolation { attempts, last: last.expect("at least one attempt") })
    }

    pub async fn detect_drift(&self, input: DriftInput) -> Result<DriftAssessment, AssistError> {
        if input.exemplars.is_empty() {
            return Err(AssistError::Precondition("no exemplars for this code".into()));
        }
        if input.candidate.trim().is_empty() {
            return Err(AssistError::Precondition("candidate passage is empty".into()));
        }
        self.call(FeatureInput::Drift(input), parse_drift).await
    }

    pub async fn generate_discussion_prompt(&self, input: DiscussionInput) -> Result<DiscussionPromptResult, AssistError> {
        if input.researchers.len() < 2 {
            return Err(AssistError::Precondition("need at least two researchers".into()));
        }
        let first = &input.researchers[0].code_name;
        if input.researchers.iter().all(|r| &r.code_name == first) {
            return Err(AssistError::Precondition("researchers applied the same code; nothing diverges".into()));
        }
        self.call(FeatureInput::DiscussionPrompt(input), parse::<DiscussionPromptResult>).await
    }

    /// Categories without notes always read [`NO_ENTRIES`], whatever the provider said.
    pub async fn summarize_reflexive_stream(&self, input: SummaryInput) -> Result<ReflexiveSummaryResult, AssistError> {
        if input.total() == 0 {
            return Err(AssistError::Precondition("no reflexive notes to summarize".into()));
        }
        let empty = [
            input.justification.is_empty(),
            input.positionality.is_empty(),
            input.alternatives.is_empty(),
            input.other.is_empty(),
        ];
        let mut s = self.call(FeatureInput::Summary(input), parse::<ReflexiveSummaryResult>).await?;
        let fields = [&mut s.linguistic_patterns, &mut s.positionality_narrative, &mut s.alternative_thinking_patterns, &mut s.notes];
        for (field, empty) in fields.into_iter().zip(empty) {
            if empty {
                *field = NO_ENTRIES.to_owned();
            }
        }
        Ok(s)
    }

    pub async fn positionality_keywords(&self, input: KeywordsInput) -> Result<String, AssistError> {
        if input.combined_text().trim().is_empty() {
            return Err(AssistError::Precondition("profile has no background text".into()));
        }
        let reply = self.call(FeatureInput::Keywords(input), parse::<PositionalityKeywords>).await?;
        Ok(reply.keywords)
    }
}
