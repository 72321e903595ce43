//! Advisory model-backed features for reflexive coding: drift alerts,
//! discussion prompts, reflexive-stream summaries and positionality keywords.
//!
//! Nothing here mutates project state. Results are suggestions; the only path
//! from an assist result to the event log is [`drift::resolve_drift`], driven
//! by an explicit user choice.

pub mod assistant;
pub mod drift;
pub mod inputs;
pub mod provider;
pub mod request;
pub mod schema;
pub mod templates;
pub mod text;

pub use assistant::{AssistError, Assistant, NO_ENTRIES};
pub use drift::{resolve_drift, should_trigger_drift, CodeUsage, DriftMode, DriftMonitor, DriftPolicy, DriftResolution, Trigger};
pub use provider::{build_provider, Provider, ProviderConfig, ProviderError, ProviderKind, RemoteProvider, StubProvider};
pub use request::{AssistRequest, CodeDefinition, DiscussionInput, DriftInput, Feature, FeatureInput, KeywordsInput, Researcher, SummaryInput};
pub use schema::{DiscussionPromptResult, PositionalityKeywords, ReflexiveSummaryResult, SchemaError};
