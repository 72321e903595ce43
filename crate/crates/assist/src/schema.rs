//! Strict parsing of provider replies against the response schemas.
//!
//! A reply must be a JSON object with exactly the schema's properties (no
//! extras, correct types, required fields present) and must also pass the
//! feature's domain checks. Anything else is a [`SchemaError`]; no partial
//! result is ever built from it.

use rta_core::model::check_keywords;
use rta_core::DriftAssessment;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("reply is not JSON: {0}")]
    NotJson(String),
    #[error("reply is not a JSON object")]
    NotObject,
    #[error("reply does not match the schema: {0}")]
    Shape(String),
    #[error("reply violates a field constraint: {0}")]
    Constraint(String),
}

/// A reply type with a fixed wire shape.
pub trait Reply: DeserializeOwned + Serialize {
    fn check(&self) -> Result<(), String>;
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DriftWire {
    drift_detected: bool,
    explanation: String,
    #[serde(default)]
    suggested_definition: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscussionPromptResult {
    pub prompt: String,
    pub title: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct ReflexiveSummaryResult {
    pub linguistic_patterns: String,
    pub positionality_narrative: String,
    pub alternative_thinking_patterns: String,
    pub notes: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PositionalityKeywords {
    pub keywords: String,
}

fn non_empty(field: &str, value: &str) -> Result<(), String> {
    if value.trim().is_empty() {
        Err(format!("{field} is empty"))
    } else {
        Ok(())
    }
}

impl Reply for DiscussionPromptResult {
    fn check(&self) -> Result<(), String> {
        non_empty("title", &self.title)?;
        non_empty("prompt", &self.prompt)
    }
}

impl Reply for ReflexiveSummaryResult {
    fn check(&self) -> Result<(), String> {
        non_empty("linguisticPatterns", &self.linguistic_patterns)?;
        non_empty("positionalityNarrative", &self.positionality_narrative)?;
        non_empty("alternativeThinkingPatterns", &self.alternative_thinking_patterns)?;
        non_empty("notes", &self.notes)
    }
}

impl Reply for PositionalityKeywords {
    fn check(&self) -> Result<(), String> {
        check_keywords(&self.keywords).map(|_| ())
    }
}

/// Typed parse of an object reply. The typed pass runs on the raw text so
/// duplicate keys are caught; the `Value` pass rejects positional arrays,
/// which serde would otherwise accept for a struct.
fn object<T: DeserializeOwned>(raw: &str) -> Result<T, SchemaError> {
    let value: Value = serde_json::from_str(raw).map_err(|e| SchemaError::NotJson(e.to_string()))?;
    if !value.is_object() {
        return Err(SchemaError::NotObject);
    }
    serde_json::from_str(raw).map_err(|e| SchemaError::Shape(e.to_string()))
}

pub fn parse<T: Reply>(raw: &str) -> Result<T, SchemaError> {
    let reply: T = object(raw)?;
    reply.check().map_err(SchemaError::Constraint)?;
    Ok(reply)
}

pub fn parse_drift(raw: &str) -> Result<DriftAssessment, SchemaError> {
    let wire: DriftWire = object(raw)?;
    let assessment = DriftAssessment {
        drift_detected: wire.drift_detected,
        explanation: wire.explanation,
        suggested_definition: wire.suggested_definition,
    };
    assessment.check().map_err(SchemaError::Constraint)?;
    Ok(assessment)
}

/// Wire form of a drift assessment, `suggested_definition` null when absent.
pub fn drift_to_wire(a: &DriftAssessment) -> Value {
    serde_json::json!({
        "drift_detected": a.drift_detected,
        "explanation": a.explanation,
        "suggested_definition": a.suggested_definition,
    })
}
