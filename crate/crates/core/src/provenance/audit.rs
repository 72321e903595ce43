use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::error::Category;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::history::{histories, HistoryEntry};
use super::ProvenanceError;
use crate::canonical::{to_canonical_bytes, to_canonical_value};
use crate::event::Event;
use crate::fold::FoldError;
use crate::ids::{CodeId, ProjectId};
use crate::model::ProjectState;

pub const FORMAT_VERSION: &str = "1";
const SUPPORTED_VERSIONS: &[&str] = &[FORMAT_VERSION];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectMeta {
    pub project_id: Option<ProjectId>,
    pub name: String,
    pub last_seq: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub code_count: usize,
    pub histories: BTreeMap<CodeId, Vec<HistoryEntry>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditTrail {
    pub format_version: String,
    /// Hex SHA-256 of the canonical bytes of `events`.
    pub checksum: String,
    pub project: ProjectMeta,
    pub events: Vec<Event>,
    pub summary: AuditSummary,
}

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("unsupported audit format version {0:?}")]
    UnknownVersion(String),
    #[error("checksum mismatch: trail is truncated or its events were altered")]
    ChecksumMismatch,
    #[error("malformed audit trail: {0}")]
    Malformed(String),
    #[error("audit summary does not match the recomputed summary")]
    SummaryMismatch,
    #[error("state does not match the exported events")]
    StateMismatch,
    #[error(transparent)]
    Provenance(#[from] ProvenanceError),
}

impl From<FoldError> for AuditError {
    fn from(e: FoldError) -> Self {
        AuditError::Provenance(ProvenanceError::InvalidLog(e))
    }
}

fn checksum(events: &[Event]) -> Result<String, AuditError> {
    let bytes = to_canonical_bytes(events).map_err(|e| AuditError::Malformed(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn summarize(events: &[Event], state: &ProjectState) -> Result<AuditSummary, AuditError> {
    Ok(AuditSummary { code_count: state.codebook.len(), histories: histories(events)? })
}

/// Serializes `events` as a self-certifying audit trail. `state` must be the fold of `events`.
pub fn export_audit(events: &[Event], state: &ProjectState) -> Result<Vec<u8>, AuditError> {
    if state.last_seq != events.last().map_or(0, |e| e.seq) {
        return Err(AuditError::StateMismatch);
    }
    let trail = AuditTrail {
        format_version: FORMAT_VERSION.to_owned(),
        checksum: checksum(events)?,
        project: ProjectMeta { project_id: state.project_id.clone(), name: state.name.clone(), last_seq: state.last_seq },
        events: events.to_vec(),
        summary: summarize(events, state)?,
    };
    to_canonical_bytes(&trail).map_err(|e| AuditError::Malformed(e.to_string()))
}

/// Parses and verifies an audit trail, returning its event list.
///
/// Truncated input is reported as a checksum mismatch, like any other integrity failure.
pub fn import_audit(bytes: &[u8]) -> Result<Vec<Event>, AuditError> {
    let value: serde_json::Value = serde_json::from_slice(bytes).map_err(|e| match e.classify() {
        Category::Eof => AuditError::ChecksumMismatch,
        _ => AuditError::Malformed(e.to_string()),
    })?;
    match value.get("format_version").and_then(|v| v.as_str()) {
        Some(v) if SUPPORTED_VERSIONS.contains(&v) => {}
        Some(v) => return Err(AuditError::UnknownVersion(v.to_owned())),
        None => return Err(AuditError::Malformed("missing format_version".into())),
    }
    let trail: AuditTrail = serde_json::from_value(value).map_err(|e| AuditError::Malformed(e.to_string()))?;
    if checksum(&trail.events)? != trail.checksum {
        return Err(AuditError::ChecksumMismatch);
    }
    let state = ProjectState::replay(&trail.events)?;
    let recomputed = summarize(&trail.events, &state)?;
    let same = to_canonical_value(&recomputed).ok() == to_canonical_value(&trail.summary).ok();
    if !same || trail.project.last_seq != state.last_seq {
        return Err(AuditError::SummaryMismatch);
    }
    Ok(trail.events)
}
